//! Experiment orchestration: one function per mode, all writing into a
//! single run directory through [`Outputs`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use oqrw_core::analysis::{
    self, estimate_deff, flip_time_stats, position_moments, purification_fit, DeffOptions, DeffSummary, EnsembleSummary, FitOptions,
    Histogram, PurificationSummary,
};
use oqrw_core::discrete::{default_stride, purification_constant, run_trajectory, sqrt_det_decay, DiscreteWalker, DiscreteWalkerState};
use oqrw_core::ensemble::{fold_ensemble, try_run_ensemble};
use oqrw_core::flips::flip_detector;
use oqrw_core::fokker_planck::{integrate_cells, solve, Grid1D, MatrixDensityField};
use oqrw_core::potential::{PotentialSpec, Sector};
use oqrw_core::record::{read_flips_csv, write_flips_csv, DecaySeries, FlipRecord, TrajectoryRecord};
use oqrw_core::sde::{recommended_dt, ContinuousRun};
use oqrw_core::telegraph::{poisson_tail, telegraph_fp_solve, telegraph_grid, telegraph_path, two_flip_density};
use oqrw_core::ModelParams;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};
use crate::manifest::{ManifestWriter, RunManifest};

/// Points in a continuous purification series.
const DECAY_POINTS: u64 = 60;
/// Default horizon (steps) of a discrete purification series.
const DISCRETE_DECAY_HORIZON: f64 = 200.0;

/// Collects the files of one run; every name carries the master seed.
pub struct Outputs {
    dir: PathBuf,
    seed: u64,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf, seed: u64) -> Self {
        Self { dir, seed, files: Vec::new() }
    }

    pub fn name(&self, stem: &str, ext: &str) -> String {
        format!("{stem}_seed{}.{ext}", self.seed)
    }

    fn create(&mut self, stem: &str, ext: &str) -> CliResult<(PathBuf, BufWriter<File>)> {
        let name = self.name(stem, ext);
        let path = self.dir.join(&name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name);
        Ok((path, BufWriter::new(f)))
    }

    fn csv<F>(&mut self, stem: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
    {
        let (path, mut w) = self.create(stem, "csv")?;
        body(&mut w).map_err(|e| CliError::io(&path, e))?;
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> CliResult<()> {
        let (path, mut w) = self.create(stem, "json")?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(&path, e))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))
    }

    fn text(&mut self, stem: &str, ext: &str, body: &str) -> CliResult<()> {
        let (path, mut w) = self.create(stem, ext)?;
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

pub fn manifest_name(seed: u64) -> String {
    format!("manifest_seed{seed}.json")
}

/// Validates, runs and finalizes one experiment under `out_root/<label>`.
pub fn run(config: &ExperimentConfig, out_root: &Path) -> CliResult<RunOutcome> {
    config.validate()?;
    let dir = out_root.join(&config.label);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let writer = ManifestWriter::begin(dir.join(manifest_name(config.seed)), config)?;
    let mut out = Outputs::new(dir.clone(), config.seed);
    let result = out.text("config", "toml", &config.to_toml()?).and_then(|_| match config.mode {
        Mode::Discrete => run_discrete(config, &mut out),
        Mode::Sde => run_sde(config, &mut out),
        Mode::Fp => run_fp(config, &mut out),
        Mode::Toy => run_toy(config, &mut out),
        Mode::Analyze => run_analyze(config, &mut out),
    });
    match result {
        Ok(()) => {
            let manifest = writer.complete(&dir, out.files())?;
            Ok(RunOutcome { dir, manifest })
        }
        Err(e) => {
            writer.fail(&dir, out.files(), &e)?;
            Err(e)
        }
    }
}

fn write_trajectory(out: &mut Outputs, rec: &TrajectoryRecord) -> CliResult<()> {
    out.csv(&format!("trajectory_{}", rec.index), |w| rec.write_csv(w))
}

fn write_flips(out: &mut Outputs, records: &[FlipRecord]) -> CliResult<()> {
    let pairs: Vec<(u64, &FlipRecord)> = records.iter().enumerate().map(|(i, r)| (i as u64, r)).collect();
    out.csv("flips", |w| write_flips_csv(w, &pairs))
}

fn write_decay(out: &mut Outputs, series: &DecaySeries) -> CliResult<()> {
    out.csv("decay", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["t_or_n", "mean_sqrt_det", "stderr", "count"])?;
        for p in &series.points {
            c.write_record([p.time.to_string(), p.mean.to_string(), p.stderr.to_string(), p.count.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })
}

/// Equal-width histogram over the sample range.
fn range_histogram(xs: &[f64], bins: usize) -> Histogram {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 1e-9 * (hi - lo) } else { 0.5 };
    Histogram::from_samples(xs, lo - pad, hi + pad, bins)
}

fn write_histogram(out: &mut Outputs, stem: &str, h: &Histogram) -> CliResult<()> {
    out.csv(stem, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["x", "density", "count"])?;
        for (k, d) in h.densities().iter().enumerate() {
            c.write_record([h.center(k).to_string(), d.to_string(), h.counts[k].to_string()])?;
        }
        c.flush()?;
        Ok(())
    })
}

fn time_tag(t: f64) -> String {
    format!("{t}")
}

/// Hysteresis flips of each recorded trajectory.
fn recorded_flips(records: &[TrajectoryRecord], h: f64) -> Vec<FlipRecord> {
    records.iter().map(|r| flip_detector(&r.times, &r.q3, h)).collect()
}

fn fit_or_none(series: &DecaySeries, opts: &FitOptions) -> CliResult<Option<analysis::DecayFit>> {
    match purification_fit(series, opts) {
        Ok(f) => Ok(Some(f)),
        Err(oqrw_core::Error::InsufficientDecay { .. } | oqrw_core::Error::NotEnoughSamples { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn moments_if_enough(times: &[f64], xs: &[Vec<f64>]) -> CliResult<Vec<analysis::TimeMoments>> {
    if xs.len() < 4 || times.is_empty() {
        return Ok(Vec::new());
    }
    Ok(position_moments(times, xs)?)
}

/// Positions of `n_traj` walks at the given (ascending) steps.
pub fn discrete_samples(config: &ExperimentConfig, steps: &[u64]) -> CliResult<Vec<Vec<f64>>> {
    let k = config.model.kraus()?;
    let rho0 = config.rho0.state()?.normalized();
    let walker = DiscreteWalker::new(k);
    Ok(try_run_ensemble(config.run.n_trajectories, config.seed, |_, rng| {
        let mut s = DiscreteWalkerState::new(rho0, 0);
        let mut done = 0;
        let mut row = Vec::with_capacity(steps.len());
        for &n in steps {
            walker.advance(&mut s, n - done, rng)?;
            done = n;
            row.push(s.x as f64);
        }
        Ok::<_, oqrw_core::Error>(row)
    })?)
}

fn run_discrete(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let k = config.model.kraus()?;
    let rho0 = config.rho0.state()?;
    let n = config.run.n_steps.unwrap_or(1);
    let stride = config.run.stride.unwrap_or_else(|| default_stride(n));
    let n_rec = config.run.recorded_trajectories.min(config.run.n_trajectories);
    let records: Vec<TrajectoryRecord> = (0..n_rec as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&k, rho0, 0, n, config.seed, i, stride))
        .collect::<Result<_, _>>()?;
    for r in &records {
        write_trajectory(out, r)?;
    }
    let flips = recorded_flips(&records, config.estimators.hysteresis);
    write_flips(out, &flips)?;

    let mut summary = EnsembleSummary { n_trajectories: config.run.n_trajectories, ..Default::default() };
    if !config.run.sample_times.is_empty() {
        let steps: Vec<u64> = config.run.sample_times.iter().map(|&t| t as u64).collect();
        let xs = discrete_samples(config, &steps)?;
        for (j, &step) in steps.iter().enumerate() {
            let col: Vec<f64> = xs.iter().map(|r| r[j]).collect();
            write_histogram(out, &format!("histogram_n{step}"), &range_histogram(&col, config.estimators.bins))?;
        }
        summary.position_moments = moments_if_enough(&config.run.sample_times, &xs)?;
    }
    if config.estimators.purification {
        let horizon = config.estimators.purification_horizon.unwrap_or(DISCRETE_DECAY_HORIZON.min(n as f64)) as u64;
        let series = sqrt_det_decay(&k, rho0, horizon, config.run.n_trajectories, config.seed)?;
        write_decay(out, &series)?;
        let opts = FitOptions { max_rel_stderr: config.estimators.max_rel_stderr, ..FitOptions::default() };
        let fit = fit_or_none(&series, &opts)?;
        summary.purification = Some(PurificationSummary { fit, series, predicted_rate: -purification_constant(&k).ln() });
    }
    summary.flip_times = flip_time_stats(&flips, config.estimators.bins);
    out.json("summary", &summary)
}

fn continuous_run(config: &ExperimentConfig, p: ModelParams, t_max: f64) -> CliResult<ContinuousRun> {
    let dt = config.run.dt.unwrap_or_else(|| recommended_dt(&p));
    let mut run = ContinuousRun::new(p, t_max, dt)?.with_scheme(config.run.scheme).with_hysteresis(config.estimators.hysteresis);
    if let Some(s) = config.run.stride {
        run = run.with_stride(s);
    }
    Ok(run)
}

fn write_samples(out: &mut Outputs, times: &[f64], x: &[Vec<f64>], q3: &[Vec<f64>]) -> CliResult<()> {
    out.csv("samples", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(SAMPLES_HEADER)?;
        for (i, (xr, qr)) in x.iter().zip(q3).enumerate() {
            for (j, t) in times.iter().enumerate() {
                c.write_record([i.to_string(), t.to_string(), xr[j].to_string(), qr[j].to_string()])?;
            }
        }
        c.flush()?;
        Ok(())
    })
}

pub const SAMPLES_HEADER: [&str; 4] = ["trajectory_id", "t", "x", "q3"];

fn write_potential(out: &mut Outputs, p: &ModelParams, half: f64) -> CliResult<()> {
    let up = PotentialSpec::new(p.a, p.omega0, Sector::Upper)?;
    let down = PotentialSpec::new(p.a, p.omega0, Sector::Lower)?;
    out.csv("potential", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["y", "v_upper", "v_lower"])?;
        let n = 400;
        for i in 0..=n {
            let y = -half + 2.0 * half * i as f64 / n as f64;
            c.write_record([y.to_string(), up.value(y).to_string(), down.value(y).to_string()])?;
        }
        c.flush()?;
        Ok(())
    })
}

/// Estimators shared by the `sde` and `analyze` modes.
fn ensemble_summary(
    config: &ExperimentConfig,
    p: &ModelParams,
    times: &[f64],
    x: &[Vec<f64>],
    flips: &[FlipRecord],
) -> CliResult<EnsembleSummary> {
    let mut summary = EnsembleSummary { n_trajectories: x.len().max(flips.len()), ..Default::default() };
    summary.position_moments = moments_if_enough(times, x)?;
    summary.flip_times = flip_time_stats(flips, config.estimators.bins);
    if let Some([t0, t1]) = config.estimators.deff_window {
        let mut opts = DeffOptions::window(t0, t1);
        opts.resamples = config.estimators.bootstrap_resamples;
        opts.seed = config.seed;
        let mean_flip = summary.flip_times.as_ref().map(|f| f.mean);
        let estimate = estimate_deff(times, x, &opts, mean_flip)?;
        summary.effective_diffusion = Some(DeffSummary { estimate, predicted: p.predicted_deff() });
    }
    Ok(summary)
}

fn run_sde(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let p = config.model.require_model()?;
    let rho0 = config.rho0.state()?;
    let t_max = config.run.t_max.unwrap_or(1.0);
    let run = continuous_run(config, p, t_max)?;
    let n_rec = config.run.recorded_trajectories.min(config.run.n_trajectories);
    let recorded: Vec<(TrajectoryRecord, FlipRecord)> =
        (0..n_rec as u64).into_par_iter().map(|i| run.simulate(rho0, 0.0, config.seed, i)).collect::<Result<_, _>>()?;
    for (r, _) in &recorded {
        write_trajectory(out, r)?;
    }
    if let Some(h) = config.estimators.potential_range {
        write_potential(out, &p, h)?;
    }

    let (times, x, flips) = if config.run.sample_times.is_empty() {
        (Vec::new(), Vec::new(), recorded.into_iter().map(|(_, f)| f).collect::<Vec<_>>())
    } else {
        let steps: Vec<u64> = config.run.sample_times.iter().map(|&t| (t / run.dt).round() as u64).collect();
        let s = run.sample_ensemble(rho0, 0.0, config.run.n_trajectories, config.seed, &steps)?;
        write_samples(out, &s.times, &s.x, &s.q3)?;
        for (j, t) in s.times.iter().enumerate() {
            write_histogram(out, &format!("histogram_t{}", time_tag(*t)), &range_histogram(&s.x_at(j), config.estimators.bins))?;
        }
        (s.times, s.x, s.flips)
    };
    write_flips(out, &flips)?;

    let mut summary = ensemble_summary(config, &p, &times, &x, &flips)?;
    summary.n_trajectories = config.run.n_trajectories;
    if config.estimators.purification {
        let horizon = config.estimators.purification_horizon.unwrap_or(t_max);
        let decay_run = continuous_run(config, p, horizon)?;
        let every = (decay_run.n_steps() / DECAY_POINTS).max(1);
        let series = decay_run.sqrt_det_decay(rho0, config.run.n_trajectories, config.seed, every)?;
        write_decay(out, &series)?;
        let opts = FitOptions { max_rel_stderr: config.estimators.max_rel_stderr, ..FitOptions::default() };
        let fit = fit_or_none(&series, &opts)?;
        summary.purification = Some(PurificationSummary { fit, series, predicted_rate: 2.0 * p.a * p.a });
    }
    out.json("summary", &summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub time: f64,
    pub mass: f64,
    pub min_trace: f64,
    /// `[tau, q1, q2, q3]` of the position-integrated state.
    pub mean_state: [f64; 4],
    /// `[mean, variance, skewness, excess kurtosis]` of the marginal.
    pub shape: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldReport {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub snapshots: Vec<FieldSnapshot>,
}

fn run_fp(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let p = config.model.require_model()?;
    let rho0 = config.rho0.state()?;
    let t_max = config.run.t_max.unwrap_or(1.0);
    let grid = Grid1D::auto(p.a, t_max, config.grid.dx, config.grid.safety)?;
    let mut times = config.run.sample_times.clone();
    times.push(t_max);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let initial = MatrixDensityField::point(&grid, 0.0, rho0)?;
    let snaps = solve(&p, &grid, initial, &times)?;
    let mut report = FieldReport { x_min: grid.x_min, x_max: grid.x_max, n_cells: grid.n_cells, dt: grid.dt, snapshots: Vec::new() };
    for s in &snaps {
        out.csv(&format!("field_t{}", time_tag(s.t)), |w| s.write_csv(&grid, w))?;
        report.snapshots.push(FieldSnapshot {
            time: s.t,
            mass: s.mass(&grid),
            min_trace: s.min_trace(),
            mean_state: s.mean_state(&grid).as_array(),
            shape: s.shape(&grid),
        });
    }
    out.json("summary", &report)
}

/// Three-way comparison of the telegraph walker at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub t: f64,
    pub n_runs: usize,
    pub dx: f64,
    pub dirac_exact: f64,
    pub dirac_simulated: f64,
    pub dirac_solver: f64,
    pub l1_simulated_solver: f64,
    pub l1_simulated_expansion: f64,
    pub l1_solver_expansion: f64,
    /// `max(0.03, P(N_t >= 3))`.
    pub l1_threshold: f64,
    pub two_flip_runs: u64,
    /// L1 distances of the exactly-two-reversal histogram to `(t + x)/4` and `t (x + 1)/4`.
    pub two_flip_l1_sum_form: f64,
    pub two_flip_l1_product_form: f64,
    pub two_flip_winner: String,
}

#[derive(Clone)]
struct ToyCounts {
    dirac: u64,
    all: Vec<u64>,
    two: Vec<u64>,
}

/// Per-cell masses of `f` (linear on each cell overlap) restricted to `[-t, t]`.
fn cell_masses<F: Fn(f64) -> f64>(grid: &Grid1D, t: f64, f: F) -> Vec<f64> {
    (0..grid.n_cells)
        .map(|i| {
            let a = grid.x_min + i as f64 * grid.dx();
            let (lo, hi) = (a.max(-t), (a + grid.dx()).min(t));
            if hi > lo {
                (hi - lo) * f(0.5 * (lo + hi))
            } else {
                0.0
            }
        })
        .collect()
}

pub fn toy_report(t: f64, n_runs: usize, dx: f64, seed: u64) -> CliResult<(ToyReport, Grid1D, [Vec<f64>; 3])> {
    let grid = telegraph_grid(t, dx)?;
    let cells = grid.n_cells;
    let cell_of = |x: f64| (((x - grid.x_min) / dx).floor().max(0.0) as usize).min(cells - 1);
    let counts = fold_ensemble(
        n_runs,
        seed,
        || ToyCounts { dirac: 0, all: vec![0; cells], two: vec![0; cells] },
        |acc, _, rng| {
            let s = telegraph_path(rng, t, 1, None);
            match s.n_flips {
                0 => acc.dirac += 1,
                n => {
                    let k = cell_of(s.x);
                    acc.all[k] += 1;
                    if n == 2 {
                        acc.two[k] += 1;
                    }
                }
            }
        },
        |a, b| {
            a.dirac += b.dirac;
            a.all.iter_mut().zip(&b.all).for_each(|(x, y)| *x += y);
            a.two.iter_mut().zip(&b.two).for_each(|(x, y)| *x += y);
        },
    );
    let n = n_runs as f64;
    let sim: Vec<f64> = counts.all.iter().map(|&c| c as f64 / n).collect();
    let fp_field = telegraph_fp_solve(&grid, t)?;
    let fp: Vec<f64> = fp_field.density().iter().map(|d| d * dx).collect();
    let e = (-t).exp();
    let expansion = cell_masses(&grid, t, |x| 0.5 * e + two_flip_density(x, t));
    let l1 = |a: &[f64], b: &[f64]| analysis::stats::l1_distance(a, b);

    let two: Vec<f64> = counts.two.iter().map(|&c| c as f64 / n).collect();
    let sum_form = cell_masses(&grid, t, |x| two_flip_density(x, t));
    let product_form = cell_masses(&grid, t, |x| e * t * (x + 1.0) / 4.0);
    let (l1_sum, l1_prod) = (l1(&two, &sum_form), l1(&two, &product_form));
    let report = ToyReport {
        t,
        n_runs,
        dx,
        dirac_exact: e,
        dirac_simulated: counts.dirac as f64 / n,
        dirac_solver: fp_field.dirac_weight,
        l1_simulated_solver: l1(&sim, &fp),
        l1_simulated_expansion: l1(&sim, &expansion),
        l1_solver_expansion: l1(&fp, &expansion),
        l1_threshold: poisson_tail(t).max(0.03),
        two_flip_runs: counts.two.iter().sum(),
        two_flip_l1_sum_form: l1_sum,
        two_flip_l1_product_form: l1_prod,
        two_flip_winner: if l1_sum < l1_prod { "(t + x)/4".into() } else { "t(x + 1)/4".into() },
    };
    Ok((report, grid, [sim, fp, expansion]))
}

fn run_toy(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let t = config.run.t_max.unwrap_or(0.5);
    let (report, grid, [sim, fp, expansion]) = toy_report(t, config.run.n_trajectories, config.grid.dx, config.seed)?;
    let dx = grid.dx();
    out.csv("toy", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["x", "simulated", "solver", "expansion"])?;
        for i in 0..grid.n_cells {
            c.write_record([grid.center(i), sim[i] / dx, fp[i] / dx, expansion[i] / dx].map(|v| v.to_string()))?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.json("toy_report", &report)
}

/// Locates the single `<stem>_seed<S>.<ext>` file of a run directory.
fn find_seeded(dir: &Path, stem: &str, ext: &str) -> CliResult<PathBuf> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let prefix = format!("{stem}_seed");
    let suffix = format!(".{ext}");
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| {
                n.strip_prefix(&prefix).and_then(|r| r.strip_suffix(&suffix)).is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
            })
        })
        .collect();
    found.sort();
    match found.len() {
        1 => Ok(found.pop().unwrap()),
        0 => Err(CliError::io(dir, format!("no {prefix}*{suffix} file"))),
        _ => Err(CliError::io(dir, format!("several {prefix}*{suffix} files"))),
    }
}

/// Reads a samples CSV back into `(times, x)` with `x[i][j]` trajectory `i` at `times[j]`.
pub fn read_samples(path: &Path) -> CliResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(f);
    let mut times: Vec<f64> = Vec::new();
    let mut x: Vec<Vec<f64>> = Vec::new();
    for row in reader.deserialize() {
        let (id, t, xv, _q3): (usize, f64, f64, f64) = row.map_err(|e| CliError::io(path, e))?;
        if id == x.len() {
            x.push(Vec::new());
        } else if id + 1 != x.len() {
            return Err(CliError::io(path, "trajectory ids must be contiguous"));
        }
        let row = x.last_mut().unwrap();
        if id == 0 {
            times.push(t);
        }
        row.push(xv);
    }
    if x.iter().any(|r| r.len() != times.len()) {
        return Err(CliError::io(path, "every trajectory needs the same sample times"));
    }
    Ok((times, x))
}

fn run_analyze(config: &ExperimentConfig, out: &mut Outputs) -> CliResult<()> {
    let input = config.input.as_deref().ok_or_else(|| CliError::Config("input: missing".into()))?;
    let prior = ExperimentConfig::load(&find_seeded(input, "config", "toml")?)?;
    if prior.mode != Mode::Sde {
        return Err(CliError::Config(format!("input: expected an sde run, found {}", prior.mode.name())));
    }
    let p = prior.model.require_model()?;
    let (times, x) = read_samples(&find_seeded(input, "samples", "csv")?)?;
    let flips_path = find_seeded(input, "flips", "csv")?;
    let f = File::open(&flips_path).map_err(|e| CliError::io(&flips_path, e))?;
    let flips: Vec<FlipRecord> = read_flips_csv(f).map_err(|e| CliError::io(&flips_path, e))?.into_iter().map(|(_, r)| r).collect();
    let mut opts = prior.clone();
    opts.estimators = config.estimators.clone();
    if opts.estimators.deff_window.is_none() {
        opts.estimators.deff_window = prior.estimators.deff_window;
    }
    let mut summary = ensemble_summary(&opts, &p, &times, &x, &flips)?;
    summary.n_trajectories = prior.run.n_trajectories;
    out.json("summary", &summary)
}

/// Cell masses of a field marginal over histogram bins, for comparisons with sampled positions.
pub fn marginal_bin_masses(grid: &Grid1D, field: &MatrixDensityField, h: &Histogram) -> Vec<f64> {
    (0..h.bins()).map(|k| integrate_cells(grid, field.marginal(), h.edge(k), h.edge(k + 1))).collect()
}
