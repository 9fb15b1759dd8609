//! Effective potential for the log-tangent coordinate `y = -log|tan(theta/2)|`.
//!
//! On a pure state the angle dynamics become `dy = 2a dB - V'(y) dt` with
//! `V(y) = -2(± omega0 sinh y + 2 a^2 log cosh y)`, the sign being that of
//! `tan(theta/2)`: `+` on the upper half circle, `-` on the lower one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Root-finding tolerance on `y`.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    /// `theta` in `(0, pi)`.
    Upper,
    /// `theta` in `(-pi, 0)`.
    Lower,
}

impl Sector {
    pub fn sign(self) -> f64 {
        match self {
            Sector::Upper => 1.0,
            Sector::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub a: f64,
    pub omega0: f64,
    pub sector: Sector,
}

impl PotentialSpec {
    pub fn new(a: f64, omega0: f64, sector: Sector) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(invalid("a", "must be finite and non-negative"));
        }
        if !omega0.is_finite() {
            return Err(invalid("omega0", "must be finite"));
        }
        Ok(Self { a, omega0, sector })
    }

    pub fn upper(a: f64, omega0: f64) -> Result<Self> {
        Self::new(a, omega0, Sector::Upper)
    }

    /// Diffusion constant of `y`, `(2a)^2 / 2`.
    pub fn diffusion(&self) -> f64 {
        2.0 * self.a * self.a
    }

    /// `(V(y), V'(y))`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let w = self.sector.sign() * self.omega0;
        let a2 = self.a * self.a;
        let v = -2.0 * (w * y.sinh() + 2.0 * a2 * log_cosh(y));
        let dv = -2.0 * (w * y.cosh() + 2.0 * a2 * y.tanh());
        (v, dv)
    }

    pub fn value(&self, y: f64) -> f64 {
        self.eval(y).0
    }
}

/// `log(cosh y)` without overflow.
pub fn log_cosh(y: f64) -> f64 {
    let ay = y.abs();
    ay + (-2.0 * ay).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn potential(spec: &PotentialSpec, y: f64) -> (f64, f64) {
    spec.eval(y)
}

/// Local minimum and maximum of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub y_min: f64,
    pub y_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// `V(y_max) - V(y_min)`.
    pub barrier: f64,
}

/// Plain bisection for a sign change of `f` on `[lo, hi]`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds the minimum and maximum of `V`; `None` unless `a^2 > omega0` strictly.
///
/// Requires `omega0 > 0`. In the upper sector, `V' = -2g` with
/// `g(y) = omega0 cosh y + 2a^2 tanh y`, which is convex on `y < 0` and
/// positive for `y >= 0`. The minimum of `g` is bracketed through the
/// monotone `g'`, and the two roots of `g` on either side of it by bisection.
pub fn potential_extrema(spec: &PotentialSpec) -> Result<Option<Extrema>> {
    if !(spec.omega0 > 0.0) {
        return Err(invalid("omega0", "extrema are defined for omega0 > 0"));
    }
    let (w, a2) = (spec.omega0, spec.a * spec.a);
    if !(a2 > w) {
        return Ok(None);
    }
    let g = |y: f64| w * y.cosh() + 2.0 * a2 * y.tanh();
    let dg = |y: f64| w * y.sinh() + 2.0 * a2 / y.cosh().powi(2);

    let mut lo = -1.0;
    while dg(lo) >= 0.0 {
        lo *= 2.0;
    }
    let y_c = bisect(dg, lo, 0.0, ROOT_TOL * 1e-2);
    let upper = if g(y_c) >= 0.0 {
        // numerically tangent: report the coincident pair
        (y_c, y_c)
    } else {
        let mut far = y_c - 1.0;
        while g(far) <= 0.0 {
            far = y_c + 2.0 * (far - y_c);
        }
        (bisect(g, far, y_c, ROOT_TOL), bisect(g, y_c, 0.0, ROOT_TOL))
    };
    let (y_min, y_max) = match spec.sector {
        Sector::Upper => upper,
        Sector::Lower => (-upper.0, -upper.1),
    };
    let (v_min, v_max) = (spec.value(y_min), spec.value(y_max));
    Ok(Some(Extrema { y_min, y_max, v_min, v_max, barrier: v_max - v_min }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Closed-form extrema: `sinh y = (-a^2 ± sqrt(a^4 - omega0^2)) / omega0`.
    fn closed_form(a: f64, w: f64) -> (f64, f64) {
        let a2 = a * a;
        let d = (a2 * a2 - w * w).sqrt();
        (((-a2 - d) / w).asinh(), ((-a2 + d) / w).asinh())
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let spec = PotentialSpec::new(1.3, 0.7, Sector::Lower).unwrap();
        for y in [-3.0, -0.4, 0.0, 0.9, 2.5] {
            let h = 1e-5;
            let fd = (spec.value(y + h) - spec.value(y - h)) / (2.0 * h);
            assert_abs_diff_eq!(spec.eval(y).1, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn log_cosh_is_stable() {
        assert_abs_diff_eq!(log_cosh(0.3), 0.3f64.cosh().ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_cosh(800.0), 800.0 - std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn extrema_for_a2() {
        let spec = PotentialSpec::upper(2.0, 1.0).unwrap();
        let e = potential_extrema(&spec).unwrap().unwrap();
        let (ymin, ymax) = closed_form(2.0, 1.0);
        assert_abs_diff_eq!(e.y_min, ymin, epsilon = 1e-9);
        assert_abs_diff_eq!(e.y_max, ymax, epsilon = 1e-9);
        assert!(e.v_min < e.v_max);
        // V_min ~ -4a^2 log(a^2/omega0) only asymptotically
        let asym = -16.0 * 4.0f64.ln();
        assert!((e.v_min - asym).abs() <= 0.25 * asym.abs(), "{} vs {}", e.v_min, asym);
    }

    #[test]
    fn lower_sector_mirrors_upper() {
        let up = potential_extrema(&PotentialSpec::upper(3.0, 1.5).unwrap()).unwrap().unwrap();
        let lo = potential_extrema(&PotentialSpec::new(3.0, 1.5, Sector::Lower).unwrap()).unwrap().unwrap();
        assert_abs_diff_eq!(up.y_min, -lo.y_min, epsilon = 1e-12);
        assert_abs_diff_eq!(up.barrier, lo.barrier, epsilon = 1e-9);
    }

    #[test]
    fn no_extremum_cases() {
        assert_eq!(potential_extrema(&PotentialSpec::upper(1.0, 1.0).unwrap()).unwrap(), None);
        assert_eq!(potential_extrema(&PotentialSpec::upper(0.0, 1.0).unwrap()).unwrap(), None);
        // a = 0: V = -2 omega0 sinh y is monotone
        let spec = PotentialSpec::upper(0.0, 1.0).unwrap();
        assert!((-50..50).all(|i| spec.eval(i as f64 * 0.2).1 < 0.0));
        assert!(potential_extrema(&PotentialSpec::upper(1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn barely_above_threshold() {
        let e = potential_extrema(&PotentialSpec::upper(1.0 + 1e-4, 1.0).unwrap()).unwrap().unwrap();
        assert!(e.y_min <= e.y_max);
        assert!(e.barrier >= 0.0);
    }
}
