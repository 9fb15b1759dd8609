//! Continuous-limit trajectories: the Bloch/position system driven by one
//! Brownian motion, the pure-state angle equation and the log-tangent
//! coordinate.
//!
//! With `N = a s3` and the rotation generator of [`crate::spin::hamiltonian`]:
//!
//! ```text
//! dq1 = -2(omega0 q3 + a^2 q1) dt - 2a q1 q3 dB
//! dq2 = -2 a^2 q2 dt              - 2a q2 q3 dB
//! dq3 =  2 omega0 q1 dt           + 2a (1 - q3^2) dB
//! dX  =  2a q3 dt                 + dB
//! ```
//!
//! The same increment `dB` drives the state and the position.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::default_stride;
use crate::ensemble::{fold_ensemble, run_ensemble, SlotMoments};
use crate::error::{invalid, Error, Result};
use crate::flips::{FlipDetector, DEFAULT_HYSTERESIS};
use crate::potential::PotentialSpec;
use crate::record::{DecayPoint, DecaySeries, FlipRecord, TrajectoryRecord};
use crate::rng::{gaussian_increment, seed_stream, StreamRng};
use crate::spin::{BlochState, ModelParams};

/// Largest Bloch norm accepted before projection back onto the unit ball.
pub const PROJECTION_TOL: f64 = 1e-3;

/// Maximum number of Brownian-bridge halvings tried on a step that would
/// leave the ball by more than [`PROJECTION_TOL`].
pub const MAX_REFINE_DEPTH: u32 = 8;

/// Clamp for the log-tangent coordinate.
pub const Y_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    /// Euler-Maruyama plus the Milstein term `(b.grad b)(dB^2 - dt)/2` on the
    /// Bloch components.
    Milstein,
    /// `rho -> M rho M^dag / tr` with
    /// `M = I - (iH + N^dag N / 2) dt + N dY + N^2 (dY^2 - dt) / 2`, where
    /// `dY = 2a q3 dt + dB` is the position increment. Completely positive, so
    /// the state never leaves the ball and pure states stay pure.
    #[default]
    KrausMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousWalkerState {
    pub rho: BlochState,
    pub x: f64,
    pub t: f64,
}

impl ContinuousWalkerState {
    pub fn new(rho: BlochState, x: f64) -> Self {
        Self { rho: rho.normalized(), x, t: 0.0 }
    }
}

/// Step size bound `0.01 min(1/a^2, 1/omega0)`.
pub fn recommended_dt(p: &ModelParams) -> f64 {
    let a2 = p.a * p.a;
    let w = p.omega0.abs();
    0.01 * [a2, w].iter().filter(|v| **v > 0.0).map(|v| 1.0 / v).fold(100.0, f64::min)
}

/// Bloch drift `f(q)`.
#[inline]
pub fn bloch_drift(p: &ModelParams, q: [f64; 3]) -> [f64; 3] {
    let a2 = p.a * p.a;
    [-2.0 * (p.omega0 * q[2] + a2 * q[0]), -2.0 * a2 * q[1], 2.0 * p.omega0 * q[0]]
}

/// Bloch noise coefficient `b(q)`.
#[inline]
pub fn bloch_noise(p: &ModelParams, q: [f64; 3]) -> [f64; 3] {
    let a = p.a;
    [-2.0 * a * q[0] * q[2], -2.0 * a * q[1] * q[2], 2.0 * a * (1.0 - q[2] * q[2])]
}

/// `(b . grad) b`, the Milstein coefficient.
#[inline]
fn bloch_milstein(p: &ModelParams, q: [f64; 3]) -> [f64; 3] {
    let a2 = p.a * p.a;
    let k = 2.0 * q[2] * q[2] - 1.0;
    [4.0 * a2 * q[0] * k, 4.0 * a2 * q[1] * k, -8.0 * a2 * q[2] * (1.0 - q[2] * q[2])]
}

/// One step with the shared increment `db` feeding both the state and `X`.
#[inline]
pub fn bloch_sde_step(
    state: &ContinuousWalkerState,
    p: &ModelParams,
    dt: f64,
    db: f64,
    scheme: Scheme,
) -> Result<ContinuousWalkerState> {
    bloch_sde_step_split(state, p, dt, db, db, scheme)
}

/// As [`bloch_sde_step`] but with separate increments for the state and the
/// position. Only the shared case describes the walk; the split form exists
/// to exhibit the state/position noise correlation.
#[inline]
pub fn bloch_sde_step_split(
    state: &ContinuousWalkerState,
    p: &ModelParams,
    dt: f64,
    db_rho: f64,
    db_x: f64,
    scheme: Scheme,
) -> Result<ContinuousWalkerState> {
    let r = &state.rho;
    let q = [r.q1, r.q2, r.q3];
    let x = state.x + 2.0 * p.a * q[2] * dt + db_x;
    let t = state.t + dt;
    if scheme == Scheme::KrausMap {
        return Ok(ContinuousWalkerState { rho: kraus_map_step(r, p, dt, db_rho, t)?, x, t });
    }
    let f = bloch_drift(p, q);
    let b = bloch_noise(p, q);
    let mut next = [0.0; 3];
    for i in 0..3 {
        next[i] = q[i] + f[i] * dt + b[i] * db_rho;
    }
    if scheme == Scheme::Milstein {
        let m = bloch_milstein(p, q);
        let c = 0.5 * (db_rho * db_rho - dt);
        for i in 0..3 {
            next[i] += m[i] * c;
        }
    }
    let norm_sq = next[0] * next[0] + next[1] * next[1] + next[2] * next[2];
    if norm_sq > 1.0 {
        let norm = norm_sq.sqrt();
        if !(norm <= 1.0 + PROJECTION_TOL) {
            return Err(Error::StateBlowUp { norm, t });
        }
        for v in &mut next {
            *v /= norm;
        }
    }
    Ok(ContinuousWalkerState { rho: BlochState::new(next[0], next[1], next[2]), x, t })
}

fn kraus_map_step(r: &BlochState, p: &ModelParams, dt: f64, db: f64, t: f64) -> Result<BlochState> {
    let a2 = p.a * p.a;
    let dy = 2.0 * p.a * r.q3 * dt + db;
    // N = a s3 gives N^dag N = N^2 = a^2 I and -iH = omega0 [[0, 1], [-1, 0]],
    // so M is real: [[d + b, w], [-w, d - b]]
    let d = 1.0 - a2 * dt + 0.5 * a2 * dy * dy;
    let b = p.a * dy;
    let w = p.omega0 * dt;
    let (m11, m12, m21, m22) = (d + b, w, -w, d - b);
    // rho = [[h11, h12], [conj h12, h22]] with h12 = (q1 - i q2) / 2
    let (h11, h22) = (0.5 * (r.trace + r.q3), 0.5 * (r.trace - r.q3));
    let (c_re, c_im) = (0.5 * r.q1, -0.5 * r.q2);
    let n11 = m11 * m11 * h11 + 2.0 * m11 * m12 * c_re + m12 * m12 * h22;
    let n22 = m21 * m21 * h11 + 2.0 * m21 * m22 * c_re + m22 * m22 * h22;
    let n12_re = m11 * m21 * h11 + (m11 * m22 + m12 * m21) * c_re + m12 * m22 * h22;
    let n12_im = (m11 * m22 - m12 * m21) * c_im;
    let tr = n11 + n22;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::StateBlowUp { norm: f64::NAN, t });
    }
    let mut q = [2.0 * n12_re / tr, -2.0 * n12_im / tr, (n11 - n22) / tr];
    // roundoff can leave a pure state a few ulps outside the ball
    let norm_sq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
    if norm_sq > 1.0 {
        let k = norm_sq.sqrt().recip();
        q.iter_mut().for_each(|v| *v *= k);
    }
    Ok(BlochState::new(q[0], q[1], q[2]))
}

/// Takes the step with increment `db`; if that overshoots the ball, splits it
/// into two halves drawn from the Brownian bridge and recurses. The law of the
/// path is unchanged.
fn refined_step<R: Rng + ?Sized>(
    state: &ContinuousWalkerState,
    p: &ModelParams,
    dt: f64,
    db: f64,
    scheme: Scheme,
    rng: &mut R,
    depth: u32,
) -> Result<ContinuousWalkerState> {
    match bloch_sde_step(state, p, dt, db, scheme) {
        Err(Error::StateBlowUp { .. }) if depth < MAX_REFINE_DEPTH => {
            let half = 0.5 * dt;
            let first = 0.5 * db + gaussian_increment(rng, (0.5 * half).sqrt());
            let mid = refined_step(state, p, half, first, scheme, rng, depth + 1)?;
            refined_step(&mid, p, half, db - first, scheme, rng, depth + 1)
        }
        other => other,
    }
}

/// Pure-state angle, `q1 = sin(theta)`, `q3 = cos(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleState {
    /// Wrapped to `(-pi, pi]`.
    pub theta: f64,
    /// Accumulated angle without wrapping.
    pub winding: f64,
    pub t: f64,
}

impl AngleState {
    pub fn new(theta: f64) -> Self {
        Self { theta: wrap_angle(theta), winding: theta, t: 0.0 }
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = theta - TAU * ((theta + PI) / TAU).floor();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Drift of the angle equation, `-2(omega0 + a^2 sin(theta) cos(theta))`.
pub fn theta_drift(p: &ModelParams, theta: f64) -> f64 {
    -2.0 * (p.omega0 + p.a * p.a * theta.sin() * theta.cos())
}

#[inline]
pub fn theta_sde_step(state: &AngleState, p: &ModelParams, dt: f64, db: f64) -> AngleState {
    let d = theta_drift(p, state.theta) * dt - 2.0 * p.a * state.theta.sin() * db;
    AngleState { theta: wrap_angle(state.theta + d), winding: state.winding + d, t: state.t + dt }
}

/// Euler-Maruyama step of `dy = 2a dB - V'(y) dt`, clamped to `|y| <= 50`.
#[inline]
pub fn y_sde_step(y: f64, spec: &PotentialSpec, dt: f64, db: f64) -> f64 {
    let (_, dv) = spec.eval(y);
    (y - dv * dt + 2.0 * spec.a * db).clamp(-Y_CLAMP, Y_CLAMP)
}

/// Settings for integrating the Bloch/position system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRun {
    pub params: ModelParams,
    pub t_max: f64,
    pub dt: f64,
    pub stride: u64,
    pub scheme: Scheme,
    pub hysteresis: f64,
}

impl ContinuousRun {
    pub fn new(params: ModelParams, t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(t_max >= dt && t_max.is_finite()) {
            return Err(invalid("t_max", "must be at least dt"));
        }
        let mut run = Self { params, t_max, dt, stride: 1, scheme: Scheme::default(), hysteresis: DEFAULT_HYSTERESIS };
        run.stride = default_stride(run.n_steps());
        Ok(run)
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_hysteresis(mut self, h: f64) -> Self {
        self.hysteresis = h;
        self
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_max / self.dt).round() as u64
    }

    pub fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    /// Integrates from `(rho0, x0)`, calling `observe(step, state)` after
    /// every step (and once for step 0). Flips are detected on every step.
    pub fn integrate<R, F>(&self, rho0: BlochState, x0: f64, rng: &mut R, mut observe: F) -> Result<(ContinuousWalkerState, FlipRecord)>
    where
        R: Rng + ?Sized,
        F: FnMut(u64, &ContinuousWalkerState),
    {
        let sq = self.dt.sqrt();
        let mut state = ContinuousWalkerState::new(rho0, x0);
        let mut flips = FlipDetector::new(self.hysteresis);
        flips.push(0.0, state.rho.q3);
        observe(0, &state);
        for n in 1..=self.n_steps() {
            let db = gaussian_increment(rng, sq);
            state = refined_step(&state, &self.params, self.dt, db, self.scheme, rng, 0)?;
            state.t = self.time_of(n);
            flips.push(state.t, state.rho.q3);
            observe(n, &state);
        }
        Ok((state, flips.finish()))
    }

    /// One recorded trajectory on stream `(seed, index)`.
    pub fn simulate(&self, rho0: BlochState, x0: f64, seed: u64, index: u64) -> Result<(TrajectoryRecord, FlipRecord)> {
        rho0.validate()?;
        let mut rng = seed_stream(seed, index);
        let mut rec = TrajectoryRecord::new(seed, index);
        let last = self.n_steps();
        let stride = self.stride;
        let (_, flips) = self.integrate(rho0, x0, &mut rng, |n, s| {
            if n % stride == 0 || n == last {
                rec.push(s.t, s.x, &s.rho);
            }
        })?;
        Ok((rec, flips))
    }

    /// Ensemble values of `X` and `q3` at the given steps, plus flip records.
    pub fn sample_ensemble(&self, rho0: BlochState, x0: f64, n_traj: usize, seed: u64, steps: &[u64]) -> Result<EnsembleSamples> {
        rho0.validate()?;
        let per: Vec<Result<(Vec<f64>, Vec<f64>, FlipRecord)>> = run_ensemble(n_traj, seed, |_, rng: &mut StreamRng| {
            let mut xs = Vec::with_capacity(steps.len());
            let mut q3 = Vec::with_capacity(steps.len());
            let mut next = 0;
            let (_, flips) = self.integrate(rho0, x0, rng, |n, s| {
                while next < steps.len() && steps[next] == n {
                    xs.push(s.x);
                    q3.push(s.rho.q3);
                    next += 1;
                }
            })?;
            Ok((xs, q3, flips))
        });
        let mut out = EnsembleSamples { times: steps.iter().map(|&n| self.time_of(n)).collect(), ..Default::default() };
        for r in per {
            let (xs, q3, flips) = r?;
            out.x.push(xs);
            out.q3.push(q3);
            out.flips.push(flips);
        }
        Ok(out)
    }

    /// Ensemble mean of `sqrt(det rho_t)` every `every` steps.
    pub fn sqrt_det_decay(&self, rho0: BlochState, n_traj: usize, seed: u64, every: u64) -> Result<DecaySeries> {
        rho0.validate()?;
        let every = every.max(1);
        let slots = (self.n_steps() / every) as usize + 1;
        let failure = std::sync::Mutex::new(None);
        let moments = fold_ensemble(
            n_traj,
            seed,
            || SlotMoments::new(slots),
            |acc, _, rng| {
                let res = self.integrate(rho0, 0.0, rng, |n, s| {
                    if n % every == 0 {
                        acc.push((n / every) as usize, s.rho.sqrt_det());
                    }
                });
                if let Err(e) = res {
                    failure.lock().unwrap().get_or_insert(e);
                }
            },
            |a, b| a.merge(&b),
        );
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let points = (0..slots)
            .map(|i| DecayPoint {
                time: self.time_of(i as u64 * every),
                mean: moments.mean(i),
                stderr: moments.stderr(i),
                count: moments.count[i],
            })
            .collect();
        Ok(DecaySeries { points })
    }
}

/// Per-trajectory samples at common times; `x[i][j]` is trajectory `i` at `times[j]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleSamples {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub q3: Vec<Vec<f64>>,
    pub flips: Vec<FlipRecord>,
}

impl EnsembleSamples {
    /// Column `j` of `x` across trajectories.
    pub fn x_at(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|row| row[j]).collect()
    }

    pub fn q3_at(&self, j: usize) -> Vec<f64> {
        self.q3.iter().map(|row| row[j]).collect()
    }

    /// Pooled inter-flip times over all trajectories.
    pub fn inter_flip_times(&self) -> Vec<f64> {
        self.flips.iter().flat_map(|f| f.inter_flip_times()).collect()
    }
}

/// Convenience wrapper: one trajectory with the default scheme and hysteresis.
pub fn simulate_continuous(
    p: &ModelParams,
    rho0: BlochState,
    x0: f64,
    t_max: f64,
    dt: f64,
    seed: u64,
    stride: u64,
) -> Result<(TrajectoryRecord, FlipRecord)> {
    ContinuousRun::new(*p, t_max, dt)?.with_stride(stride).simulate(rho0, x0, seed, 0)
}
