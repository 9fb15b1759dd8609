//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use oqrw_cli::config::ExperimentConfig;
use oqrw_cli::presets::{preset, PRESET_NAMES};
use oqrw_cli::run::{marginal_bin_masses, run, toy_report};
use oqrw_cli::seed_stream;
use oqrw_core::analysis::mfpt::{kramers_candidates, mfpt_oracle, MfptSpec};
use oqrw_core::analysis::stats::{l1_distance, mean, variance};
use oqrw_core::analysis::{estimate_deff, ks_exponential, purification_fit, sample_moments, DeffOptions, FitOptions, Histogram};
use oqrw_core::discrete::{final_states, purification_constant, sqrt_det_decay};
use oqrw_core::fokker_planck::{solve, Grid1D, MatrixDensityField};
use oqrw_core::potential::{potential_extrema, PotentialSpec};
use oqrw_core::sde::{recommended_dt, ContinuousRun};
use oqrw_core::spin::measurement_split;
use oqrw_core::{BlochState, KrausPair, KrausParamsUvrs, ModelParams, ScalingParams};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fig1_pair() -> KrausPair {
    KrausPair::from_uvrs(&KrausParamsUvrs::new(1.1, 1.0, 0.00015, -0.00015).unwrap()).unwrap()
}

fn random_uvrs<R: Rng>(rng: &mut R) -> KrausParamsUvrs {
    let d = Uniform::new(-2.0, 2.0).unwrap();
    loop {
        if let Ok(p) = KrausParamsUvrs::new(d.sample(rng), d.sample(rng), d.sample(rng), d.sample(rng)) {
            if p.delta() > 1e-3 {
                return p;
            }
        }
    }
}

fn random_state<R: Rng>(rng: &mut R) -> BlochState {
    let d = Uniform::new(-1.0, 1.0).unwrap();
    loop {
        let s = BlochState::new(d.sample(rng), d.sample(rng), d.sample(rng));
        if s.bloch_norm_sq() <= 1.0 {
            return s;
        }
    }
}

fn unitarity() -> Outcome {
    let mut rng = seed_stream(101, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let k = KrausPair::from_uvrs(&random_uvrs(&mut rng)).map_err(|e| e.to_string())?;
        worst = worst.max(k.unitarity_residual());
    }
    check(worst <= 1e-12, format!("max residual {worst:.2e} over 1e5 pairs"))
}

fn purification_identity() -> Outcome {
    let mut rng = seed_stream(102, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let k = KrausPair::from_uvrs(&random_uvrs(&mut rng)).map_err(|e| e.to_string())?;
        let rho = random_state(&mut rng);
        let s = measurement_split(&rho, &k);
        let branch = |p: f64, r: Option<BlochState>| r.map_or(0.0, |r| p * r.sqrt_det());
        let lhs = branch(s.p_plus, s.rho_plus) + branch(s.p_minus, s.rho_minus);
        let rhs = purification_constant(&k) * rho.sqrt_det();
        worst = worst.max((lhs - rhs).abs());
    }
    check(worst <= 1e-12, format!("max |p+ sqrt det rho+ + p- sqrt det rho- - c sqrt det rho| = {worst:.2e}"))
}

fn purification_monte_carlo() -> Outcome {
    let k = fig1_pair();
    let c = purification_constant(&k);
    let series = sqrt_det_decay(&k, BlochState::maximally_mixed(), 200, 100_000, 103).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (n, p) in series.points.iter().enumerate() {
        let expected = 0.5 * c.powi(n as i32);
        let z = if p.stderr > 0.0 { (p.mean - expected).abs() / p.stderr } else { (p.mean - expected).abs() * 1e12 };
        worst = worst.max(z);
    }
    check(worst <= 4.0, format!("largest deviation {worst:.2} standard errors over n = 0..200"))
}

fn continuous_purification() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, a) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let p = ModelParams::new(a, 1.0).unwrap();
        let run = ContinuousRun::new(p, 3.0 / (2.0 * a * a), 1e-4).map_err(|e| e.to_string())?;
        let every = (run.n_steps() / 60).max(1);
        let series = run.sqrt_det_decay(BlochState::maximally_mixed(), 10_000, 104 + i as u64, every).map_err(|e| e.to_string())?;
        let fit = purification_fit(&series, &FitOptions::default()).map_err(|e| e.to_string())?;
        let rel = fit.relative_deviation(2.0 * a * a);
        ok &= rel.abs() <= 0.05;
        parts.push(format!("a={a}: rate {:.4} vs {:.1} ({:+.2}%)", fit.rate, 2.0 * a * a, 100.0 * rel));
    }
    check(ok, parts.join("; "))
}

fn bistability_threshold() -> Outcome {
    let a: Vec<f64> = (1..=20).map(|i| 0.15 * i as f64).collect();
    let mut wrong = Vec::new();
    for (i, &ai) in a.iter().enumerate() {
        for (j, &aj) in a.iter().enumerate() {
            let omega0 = aj * aj;
            let spec = PotentialSpec::upper(ai, omega0).map_err(|e| e.to_string())?;
            let found = potential_extrema(&spec).map_err(|e| e.to_string())?.is_some();
            if found != (ai * ai > omega0) {
                wrong.push((i, j));
            }
        }
    }
    check(wrong.is_empty(), format!("400 points, 20 on the a^2 = omega0 diagonal, misclassified {wrong:?}"))
}

fn flip_time_oracle() -> Outcome {
    let (a, w) = (2.0, 1.0);
    let p = ModelParams::new(a, w).unwrap();
    let oracle = mfpt_oracle(&MfptSpec::standard(a, w).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let (arrhenius, ratio) = kramers_candidates(a, w).map_err(|e| e.to_string())?;
    let run = ContinuousRun::new(p, 2000.0, 0.0025).map_err(|e| e.to_string())?;
    let s = run.sample_ensemble(BlochState::pure_up(), 0.0, 32, 106, &[]).map_err(|e| e.to_string())?;
    let waits = s.inter_flip_times();
    let m = mean(&waits);
    let ks = ks_exponential(&waits, m);
    let ok = waits.len() >= 1000 && m <= 2.0 * oracle && m >= 0.5 * oracle && ks <= 0.05;
    check(
        ok,
        format!(
            "{} flips, mean {m:.3} vs quadrature {oracle:.3} (ratio {:.3}), KS {ks:.4}; closed forms (not asserted): exp(dV/4a^2) = {arrhenius:.3}, a^2/omega0^2 = {ratio:.3}",
            waits.len(),
            m / oracle
        ),
    )
}

fn deff_case(a: f64, dt: f64, t_max: f64, window: (f64, f64), seed: u64) -> Result<(f64, f64, f64, f64), String> {
    let p = ModelParams::new(a, 1.0).unwrap();
    let run = ContinuousRun::new(p, t_max, dt).map_err(|e| e.to_string())?;
    let every = (10.0 / dt).round() as u64;
    let steps: Vec<u64> = (0..=run.n_steps() / every).map(|k| k * every).collect();
    let s = run.sample_ensemble(BlochState::pure_up(), 0.0, 4000, seed, &steps).map_err(|e| e.to_string())?;
    let waits = s.inter_flip_times();
    let mean_flip = (!waits.is_empty()).then(|| mean(&waits));
    let mut opts = DeffOptions::window(window.0, window.1);
    opts.seed = seed;
    let est = estimate_deff(&s.times, &s.x, &opts, mean_flip).map_err(|e| e.to_string())?;
    Ok((est.value, est.ci_low, est.ci_high, p.predicted_deff()))
}

fn effective_diffusion() -> Outcome {
    let (v1, l1, h1, p1) = deff_case(0.5, 0.005, 200.0, (50.0, 200.0), 107)?;
    let (v2, l2, h2, p2) = deff_case(2.0, 0.0025, 400.0, (100.0, 400.0), 108)?;
    let r1 = v1 / p1 - 1.0;
    let r2 = v2 / p2 - 1.0;
    check(
        r1.abs() <= 0.10 && r2.abs() <= 0.15,
        format!(
            "a=0.5: {v1:.3} [{l1:.3}, {h1:.3}] vs {p1:.3} ({:+.1}%); a=2: {v2:.2} [{l2:.2}, {h2:.2}] vs {p2:.0} ({:+.1}%)",
            100.0 * r1,
            100.0 * r2
        ),
    )
}

fn pde_monte_carlo() -> Outcome {
    let p = ModelParams::new(2.0, 1.0).unwrap();
    let t = 2.0;
    let grid = Grid1D::auto(p.a, t, 0.01, 0.9).map_err(|e| e.to_string())?;
    let initial = MatrixDensityField::point(&grid, 0.0, BlochState::pure_up()).map_err(|e| e.to_string())?;
    let m0 = initial.mass(&grid);
    let snap = solve(&p, &grid, initial, &[t]).map_err(|e| e.to_string())?.pop().unwrap();
    let drift = (snap.mass(&grid) - m0).abs();

    let run = ContinuousRun::new(p, t, 0.0025).map_err(|e| e.to_string())?;
    let s = run.sample_ensemble(BlochState::pure_up(), 0.0, 100_000, 109, &[run.n_steps()]).map_err(|e| e.to_string())?;
    let xs = s.x_at(0);
    let h = Histogram::from_samples(&xs, -12.0, 12.0, 96);
    let mc = h.masses();
    let pde = marginal_bin_masses(&grid, &snap, &h);
    let l1 = l1_distance(&mc, &pde) + (h.below + h.above) as f64 / h.total as f64;
    check(l1 <= 0.05 && drift <= 1e-6, format!("L1 {l1:.4} over 96 bins of width 0.25; trace drift {drift:.1e}"))
}

fn skewed_pdf() -> Outcome {
    let mut sds = Vec::new();
    let mut skews = Vec::new();
    for (i, r) in [0.1f64, 1.0, 3.0].into_iter().enumerate() {
        let p = ModelParams::new(r.sqrt(), 1.0).unwrap();
        let run = ContinuousRun::new(p, 1.0, recommended_dt(&p).min(2.5e-3)).map_err(|e| e.to_string())?;
        let s = run.sample_ensemble(BlochState::pure_up(), 0.0, 10_000, 110 + i as u64, &[run.n_steps()]).map_err(|e| e.to_string())?;
        let m = sample_moments(&s.x_at(0)).map_err(|e| e.to_string())?;
        sds.push(m.std_dev());
        skews.push(m.skewness.abs());
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);

    let p = ModelParams::new(3f64.sqrt(), 1.0).unwrap();
    let t_long = 250.0;
    let run = ContinuousRun::new(p, t_long, 2.5e-3).map_err(|e| e.to_string())?;
    let s = run.sample_ensemble(BlochState::pure_up(), 0.0, 10_000, 113, &[run.n_steps()]).map_err(|e| e.to_string())?;
    let flip_mean = mean(&s.inter_flip_times());
    let m = sample_moments(&s.x_at(0)).map_err(|e| e.to_string())?;
    let ok = increasing(&sds) && increasing(&skews) && t_long >= 50.0 * flip_mean && m.excess_kurtosis.abs() <= 0.2;
    check(
        ok,
        format!(
            "t=1: sd {:.3}/{:.3}/{:.3}, |skew| {:.3}/{:.3}/{:.3}; a^2=3 at t={t_long} ({:.0} flip times): excess kurtosis {:.3} +- {:.3}",
            sds[0],
            sds[1],
            sds[2],
            skews[0],
            skews[1],
            skews[2],
            t_long / flip_mean,
            m.excess_kurtosis,
            m.se_kurtosis
        ),
    )
}

fn discrete_continuous() -> Outcome {
    let (a, w, eps, t) = (1.0, 1.0, 1e-4, 10.0);
    let sp = ScalingParams::new(a, w, eps).unwrap();
    let k = KrausPair::from_scaling(&sp).map_err(|e| e.to_string())?;
    let rho0 = BlochState::maximally_mixed();
    let n = (t / eps).round() as u64;
    let finals = final_states(&k, rho0, n, 20_000, 114).map_err(|e| e.to_string())?;
    let dx: Vec<f64> = finals.iter().map(|s| s.x as f64 * eps.sqrt()).collect();
    let dq: Vec<f64> = finals.iter().map(|s| s.rho.q3).collect();

    let run = ContinuousRun::new(sp.model(), t, 1e-3).map_err(|e| e.to_string())?;
    let s = run.sample_ensemble(rho0, 0.0, 20_000, 115, &[run.n_steps()]).map_err(|e| e.to_string())?;
    let (cx, cq) = (s.x_at(0), s.q3_at(0));

    let compare = |name: &str, d: &[f64], c: &[f64]| {
        let (md, mc, vd, vc) = (mean(d), mean(c), variance(d), variance(c));
        let mean_ok = (md - mc).abs() <= 0.05 * vc.sqrt();
        let var_ok = (vd / vc - 1.0).abs() <= 0.05;
        (mean_ok && var_ok, format!("{name}: mean {md:.4}/{mc:.4}, var {vd:.4}/{vc:.4}"))
    };
    let (ok_x, dx_text) = compare("X", &dx, &cx);
    let (ok_q, dq_text) = compare("q3", &dq, &cq);
    check(ok_x && ok_q, format!("discrete/continuous at t=10, {dx_text}; {dq_text}"))
}

/// Density of the exactly-two-reversal part from sampled uniform order
/// statistics, binned on `[-t, t]`.
fn two_flip_histogram(t: f64, samples: usize, bins: usize) -> Vec<f64> {
    let mut rng = seed_stream(116, 0);
    let mut h = Histogram::new(-t, t, bins);
    for _ in 0..samples {
        let (u, v): (f64, f64) = (rng.random::<f64>() * t, rng.random::<f64>() * t);
        let (s1, s2) = if u < v { (u, v) } else { (v, u) };
        h.add(t + 2.0 * s1 - 2.0 * s2);
    }
    let weight = (-t).exp() * t * t / 2.0;
    h.masses().into_iter().map(|m| m * weight).collect()
}

fn toy_model() -> Outcome {
    let t = 0.5;
    let (r, _, _) = toy_report(t, 1_000_000, 0.01, 117).map_err(|e| e.to_string())?;
    let rel = |v: f64| (v / r.dirac_exact - 1.0).abs();
    let pair_max = r.l1_simulated_solver.max(r.l1_simulated_expansion).max(r.l1_solver_expansion);

    let bins = 100;
    let width = 2.0 * t / bins as f64;
    let sampled = two_flip_histogram(t, 10_000_000, bins);
    let e = (-t).exp();
    let candidate = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..bins).map(|k| f(-t + (k as f64 + 0.5) * width) * width).collect() };
    let sum_form = l1_distance(&sampled, &candidate(&|x| e * (t + x) / 4.0));
    let product_form = l1_distance(&sampled, &candidate(&|x| e * t * (x + 1.0) / 4.0));
    let winner = if sum_form < product_form { "(t + x)/4" } else { "t(x + 1)/4" };
    println!("    two-flip term: L1 to (t + x)/4 = {sum_form:.2e}, to t(x + 1)/4 = {product_form:.2e}; winner {winner}");
    check(
        rel(r.dirac_simulated) <= 0.01 && rel(r.dirac_solver) <= 0.01 && pair_max <= r.l1_threshold,
        format!(
            "Dirac {:.5} (sim) / {:.5} (solver) vs {:.5}; L1 sim-solver {:.4}, sim-expansion {:.4}, solver-expansion {:.4} <= {:.4}; two-flip winner {winner}",
            r.dirac_simulated, r.dirac_solver, r.dirac_exact, r.l1_simulated_solver, r.l1_simulated_expansion, r.l1_solver_expansion, r.l1_threshold
        ),
    )
}

/// Shrinks a preset run to a few seconds.
fn reduced(name: &str, c: &ExperimentConfig) -> ExperimentConfig {
    let o: &[&str] = match name {
        "fig1" | "fig4" => &["run.n_steps=20000"],
        "fig2" => &["run.n_steps=2000", "run.n_trajectories=300", "run.sample_times=[500.0, 1000.0, 2000.0]"],
        "fig3" => &["run.n_steps=1000", "run.n_trajectories=300", "run.sample_times=[1000.0]"],
        "fig5" => &["run.t_max=5.0", "run.n_trajectories=2", "run.recorded_trajectories=2"],
        _ => &["run.n_trajectories=20000"],
    };
    c.with_overrides(&o.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap()
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).unwrap();
        if name.starts_with("manifest_") {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v["wall_clock_seconds"] = serde_json::Value::from(0.0);
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn determinism() -> Outcome {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().map_err(|e| e.to_string())?;
    let mut runs = 0;
    let mut differing = Vec::new();
    for name in PRESET_NAMES {
        for c in preset(name).map_err(|e| e.to_string())? {
            let c = reduced(name, &c);
            let a = run(&c, first.path()).map_err(|e| e.to_string())?;
            let b = pool.install(|| run(&c, second.path())).map_err(|e| e.to_string())?;
            let (da, db) = (dir_contents(&a.dir), dir_contents(&b.dir));
            if da != db {
                differing.push(c.label.clone());
            }
            runs += 1;
        }
    }
    check(differing.is_empty(), format!("{runs} preset runs repeated with a different thread count; differing: {differing:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("unitarity identity", unitarity),
        ("purification law, exact conditional form", purification_identity),
        ("purification law, Monte Carlo", purification_monte_carlo),
        ("continuous purification rate", continuous_purification),
        ("bi-stability threshold", bistability_threshold),
        ("flip-time oracle agreement", flip_time_oracle),
        ("effective diffusion constant", effective_diffusion),
        ("grid solver against Monte Carlo", pde_monte_carlo),
        ("skewed position distribution", skewed_pdf),
        ("discrete against continuous", discrete_continuous),
        ("telegraph three-way agreement", toy_model),
        ("end-to-end determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {detail} [{secs:.1} s]", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
