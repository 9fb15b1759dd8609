//! Discrete open quantum random walk: sequential probe measurements update the
//! internal state and move the walker one lattice site left or right.

use rand::Rng;

use crate::ensemble::{fold_ensemble, SlotMoments};
use crate::error::{invalid, Error, Result};
use crate::record::{DecayPoint, DecaySeries, Outcome, TrajectoryRecord};
use crate::rng::{seed_stream, StreamRng};
use crate::spin::{BlochState, KrausPair, BRANCH_FLOOR};

/// Measurement records are kept only for runs up to this many steps.
pub const OUTCOME_RECORD_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteWalkerState {
    pub rho: BlochState,
    pub x: i64,
    pub step: u64,
}

impl DiscreteWalkerState {
    pub fn new(rho: BlochState, x: i64) -> Self {
        Self { rho, x, step: 0 }
    }
}

/// A Kraus pair with its Bloch-space transfer matrices cached for stepping.
#[derive(Debug, Clone)]
pub struct DiscreteWalker {
    kraus: KrausPair,
    maps: [[[f64; 4]; 4]; 2],
}

#[inline]
fn apply(t: &[[f64; 4]; 4], v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(t) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

impl DiscreteWalker {
    pub fn new(kraus: KrausPair) -> Self {
        let maps = kraus.transfer_matrices();
        Self { kraus, maps }
    }

    pub fn kraus(&self) -> &KrausPair {
        &self.kraus
    }

    /// Probability of the `+` outcome.
    #[inline]
    pub fn p_plus(&self, rho: &BlochState) -> f64 {
        let t = &self.maps[0][0];
        let v = rho.as_array();
        t[0] * v[0] + t[1] * v[1] + t[2] * v[2] + t[3] * v[3]
    }

    /// Applies a given outcome.
    pub fn step_forced(&self, state: &DiscreteWalkerState, outcome: Outcome) -> Result<DiscreteWalkerState> {
        let map = match outcome {
            Outcome::Plus => &self.maps[0],
            Outcome::Minus => &self.maps[1],
        };
        let out = apply(map, &state.rho.as_array());
        let p = out[0];
        if p < BRANCH_FLOOR {
            return Err(Error::DegenerateBranch { probability: p });
        }
        let inv = 1.0 / p;
        Ok(DiscreteWalkerState {
            rho: BlochState { trace: 1.0, q1: out[1] * inv, q2: out[2] * inv, q3: out[3] * inv },
            x: state.x + outcome.sign(),
            step: state.step + 1,
        })
    }

    /// One step driven by a uniform variate `uniform` in `[0, 1)`: outcome `+`
    /// iff `uniform < p+`.
    #[inline]
    pub fn step_with(&self, state: &DiscreteWalkerState, uniform: f64) -> Result<(DiscreteWalkerState, Outcome)> {
        let outcome = if uniform < self.p_plus(&state.rho) { Outcome::Plus } else { Outcome::Minus };
        Ok((self.step_forced(state, outcome)?, outcome))
    }

    /// One step consuming exactly one uniform variate from `rng`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: &DiscreteWalkerState, rng: &mut R) -> Result<(DiscreteWalkerState, Outcome)> {
        self.step_with(state, rng.random::<f64>())
    }

    pub fn advance<R: Rng + ?Sized>(&self, state: &mut DiscreteWalkerState, n: u64, rng: &mut R) -> Result<()> {
        for _ in 0..n {
            *state = self.step(state, rng)?.0;
        }
        Ok(())
    }
}

/// Final states of `n_traj` independent walks of `n_steps` steps from `(rho0, 0)`.
pub fn final_states(k: &KrausPair, rho0: BlochState, n_steps: u64, n_traj: usize, seed: u64) -> Result<Vec<DiscreteWalkerState>> {
    rho0.validate()?;
    let walker = DiscreteWalker::new(*k);
    let rho0 = rho0.normalized();
    crate::ensemble::try_run_ensemble(n_traj, seed, |_, rng: &mut StreamRng| {
        let mut s = DiscreteWalkerState::new(rho0, 0);
        walker.advance(&mut s, n_steps, rng)?;
        Ok(s)
    })
}

pub fn default_stride(n_steps: u64) -> u64 {
    (n_steps / 10_000).max(1)
}

/// Simulates one trajectory on stream `(seed, index)`, recording every
/// `stride`-th state (starting with step 0) and the final state.
pub fn run_trajectory(
    k: &KrausPair,
    rho0: BlochState,
    x0: i64,
    n_steps: u64,
    seed: u64,
    index: u64,
    stride: u64,
) -> Result<TrajectoryRecord> {
    if n_steps == 0 {
        return Err(invalid("n_steps", "must be at least 1"));
    }
    if stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    rho0.validate()?;
    let walker = DiscreteWalker::new(*k);
    let mut rng = seed_stream(seed, index);
    let mut rec = TrajectoryRecord::new(seed, index);
    let mut outcomes = (n_steps <= OUTCOME_RECORD_LIMIT).then(|| Vec::with_capacity(n_steps as usize));
    let mut state = DiscreteWalkerState::new(rho0.normalized(), x0);
    rec.push(0.0, x0 as f64, &state.rho);
    for n in 1..=n_steps {
        let (next, s) = walker.step(&state, &mut rng)?;
        state = next;
        if let Some(o) = outcomes.as_mut() {
            o.push(s);
        }
        if n % stride == 0 || n == n_steps {
            rec.push(n as f64, state.x as f64, &state.rho);
        }
    }
    rec.outcomes = outcomes;
    Ok(rec)
}

/// `c = |det B+| + |det B-|`, the per-step contraction of `E[sqrt(det rho)]`.
pub fn purification_constant(k: &KrausPair) -> f64 {
    k.b_plus().det().norm() + k.b_minus().det().norm()
}

/// True when both Kraus operators are proportional to unitaries.
pub fn is_classical(k: &KrausPair, tol: f64) -> bool {
    let prop_unitary = |b: &crate::spin::Complex2x2| {
        let g = b.adjoint() * *b;
        let half = 0.5 * g.trace().re;
        (g - crate::spin::Complex2x2::identity().scale_re(half)).max_abs() <= tol
    };
    prop_unitary(k.b_plus()) && prop_unitary(k.b_minus())
}

/// Ensemble mean of `sqrt(det rho_n)` for `n = 0..=n_max`.
pub fn sqrt_det_decay(k: &KrausPair, rho0: BlochState, n_max: u64, n_traj: usize, seed: u64) -> Result<DecaySeries> {
    rho0.validate()?;
    let walker = DiscreteWalker::new(*k);
    let slots = n_max as usize + 1;
    let failure = std::sync::Mutex::new(None);
    let moments = fold_ensemble(
        n_traj,
        seed,
        || SlotMoments::new(slots),
        |acc, _, rng: &mut StreamRng| {
            let mut state = DiscreteWalkerState::new(rho0.normalized(), 0);
            acc.push(0, state.rho.sqrt_det());
            for n in 1..slots {
                match walker.step(&state, rng) {
                    Ok((next, _)) => state = next,
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
                acc.push(n, state.rho.sqrt_det());
            }
        },
        |a, b| a.merge(&b),
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let points = (0..slots)
        .map(|n| DecayPoint {
            time: n as f64,
            mean: moments.mean(n),
            stderr: moments.stderr(n),
            count: moments.count[n],
        })
        .collect();
    Ok(DecaySeries { points })
}

/// Deterministic mean-state recursion `rho -> B+ rho B+^dag + B- rho B-^dag`.
pub fn mean_state(k: &KrausPair, rho0: BlochState, n: u64) -> BlochState {
    let [tp, tm] = k.transfer_matrices();
    let mut v = rho0.as_array();
    for _ in 0..n {
        let a = apply(&tp, &v);
        let b = apply(&tm, &v);
        v = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
    }
    BlochState::from_array(v)
}
