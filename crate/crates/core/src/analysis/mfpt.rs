//! Mean first-passage time of `dy = -V'(y) dt + 2a dB` from the well to a
//! point past the barrier, by nested adaptive Simpson quadrature, plus a
//! direct escape simulation for cross-checks.

use serde::{Deserialize, Serialize};

use crate::ensemble::try_run_ensemble;
use crate::error::{invalid, Error, Result};
use crate::potential::{potential_extrema, Extrema, PotentialSpec};
use crate::rng::gaussian_increment;
use crate::sde::y_sde_step;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfptSpec {
    pub a: f64,
    pub omega0: f64,
    pub y0: f64,
    /// Absorbing point.
    pub yb: f64,
    /// Relative quadrature tolerance.
    pub tol: f64,
}

impl MfptSpec {
    /// Starts at the well bottom, absorbs 2 units past the barrier top.
    pub fn standard(a: f64, omega0: f64) -> Result<Self> {
        let e = barrier(a, omega0)?;
        Ok(Self { a, omega0, y0: e.y_min, yb: e.y_max + 2.0, tol: 1e-4 })
    }

    fn potential(&self) -> Result<PotentialSpec> {
        PotentialSpec::upper(self.a, self.omega0)
    }
}

fn barrier(a: f64, omega0: f64) -> Result<Extrema> {
    let spec = PotentialSpec::upper(a, omega0)?;
    potential_extrema(&spec)?.ok_or(Error::NoBarrier { a2: a * a, omega0 })
}

fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!("no convergence on [{a}, {b}]")));
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)? + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`. The interval is
/// first cut into `pieces` panels so narrow peaks are not missed.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, pieces: usize) -> Result<f64> {
    let pieces = pieces.max(1);
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == pieces { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)?;
    }
    Ok(total)
}

/// `T = (1/D) int_{y0}^{yb} dz int_{-inf}^{z} exp((V(z) - V(w)) / D) dw`
/// with `D = 2a^2`. The inner range is cut where `V(w) - V_min > D ln 1e16`.
pub fn mfpt_oracle(spec: &MfptSpec) -> Result<f64> {
    let e = barrier(spec.a, spec.omega0)?;
    if !(spec.y0 < spec.yb) {
        return Err(invalid("yb", "must exceed y0"));
    }
    if !(spec.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let pot = spec.potential()?;
    let d = pot.diffusion();
    let v_min = e.v_min;
    let cut = d * 1e16f64.ln();
    let mut w_lo = e.y_min.min(spec.y0) - 1.0;
    while pot.value(w_lo) - v_min <= cut {
        w_lo -= 1.0;
    }
    // weights relative to the well bottom keep every exponent bounded
    let inner_f = |w: f64| (-(pot.value(w) - v_min) / d).exp();
    let inner_scale = adaptive_simpson(&inner_f, w_lo, e.y_min + 1.0, 1e-3, 64)?;
    let inner = |z: f64| -> f64 {
        if z <= w_lo {
            return 0.0;
        }
        adaptive_simpson(&inner_f, w_lo, z, 1e-3 * spec.tol * inner_scale, 16).unwrap_or(f64::NAN)
    };
    let outer_f = |z: f64| ((pot.value(z) - v_min) / d).exp() * inner(z);
    let rough = adaptive_simpson(&outer_f, spec.y0, spec.yb, 1e-2 * inner_scale, 32)?;
    let t = adaptive_simpson(&outer_f, spec.y0, spec.yb, 1e-2 * spec.tol * rough.abs(), 32)? / d;
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Quadrature("non-finite first-passage time".into()))
    }
}

/// The two closed-form escape-time scalings `exp(dV / 4a^2)` and `a^2 / omega0^2`,
/// for reporting next to the oracle.
pub fn kramers_candidates(a: f64, omega0: f64) -> Result<(f64, f64)> {
    let e = barrier(a, omega0)?;
    Ok(((e.barrier / (4.0 * a * a)).exp(), a * a / (omega0 * omega0)))
}

/// First-passage times of the `y` diffusion from `spec.y0` to `spec.yb`,
/// one per trajectory, with Euler-Maruyama step `dt`.
pub fn simulate_escape_times(spec: &MfptSpec, n: usize, dt: f64, seed: u64, t_cap: f64) -> Result<Vec<f64>> {
    let pot = spec.potential()?;
    let sq = dt.sqrt();
    let max_steps = (t_cap / dt).ceil() as u64;
    try_run_ensemble(n, seed, |_, rng| {
        let mut y = spec.y0;
        for k in 1..=max_steps {
            y = y_sde_step(y, &pot, dt, gaussian_increment(rng, sq));
            if y >= spec.yb {
                return Ok(k as f64 * dt);
            }
        }
        Err(invalid("t_cap", "escape not reached before the cap"))
    })
}
