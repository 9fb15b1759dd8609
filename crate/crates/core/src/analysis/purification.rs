//! Exponential fit of the mean `sqrt(det rho)` decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::DecaySeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub t_start: f64,
    pub t_end: f64,
    /// Points whose relative standard error exceeds this are dropped.
    pub max_rel_stderr: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { t_start: f64::NEG_INFINITY, t_end: f64::INFINITY, max_rel_stderr: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Decay rate `k` in `mean ~ A exp(-k t)`.
    pub rate: f64,
    pub stderr: f64,
    pub log_amplitude: f64,
    pub n_points: usize,
    /// `mean(last) / mean(first)` over the fitted points.
    pub decay_ratio: f64,
}

impl DecayFit {
    pub fn relative_deviation(&self, predicted: f64) -> f64 {
        (self.rate - predicted) / predicted
    }
}

/// Weighted least squares of `ln mean` against time, weights from the
/// standard error of the log. The reported stderr is the fully correlated
/// bound `sum |c_i| sigma_i` for `rate = sum c_i ln mean_i`, since points of
/// one ensemble share trajectories. Fails with `InsufficientDecay` when the
/// fitted points span less than a factor 10.
pub fn purification_fit(series: &DecaySeries, opts: &FitOptions) -> Result<DecayFit> {
    let pts: Vec<(f64, f64, f64)> = series
        .points
        .iter()
        .filter(|p| p.time >= opts.t_start && p.time <= opts.t_end && p.mean > 0.0)
        .map(|p| (p.time, p.mean.ln(), (p.stderr / p.mean).max(1e-9)))
        .filter(|&(_, _, s)| s <= opts.max_rel_stderr)
        .collect();
    if pts.len() < 3 {
        return Err(Error::NotEnoughSamples { needed: 3, got: pts.len() });
    }
    let w: Vec<f64> = pts.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let sw: f64 = w.iter().sum();
    let mt = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - mt) * (p.0 - mt)).sum();
    let coef: Vec<f64> = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - mt) / sxx).collect();
    let slope: f64 = coef.iter().zip(&pts).map(|(c, p)| c * p.1).sum();
    let stderr: f64 = coef.iter().zip(&pts).map(|(c, p)| c.abs() * p.2).sum();
    let first = pts.first().unwrap();
    let last = pts.last().unwrap();
    let decay_ratio = (last.1 - first.1).exp();
    let rate = -slope;
    if decay_ratio > 0.1 {
        return Err(Error::InsufficientDecay { ratio: decay_ratio, rate, stderr });
    }
    Ok(DecayFit { rate, stderr, log_amplitude: my - slope * mt, n_points: pts.len(), decay_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::DecayPoint;

    fn series(rate: f64, n: usize, rel: f64) -> DecaySeries {
        DecaySeries {
            points: (0..n)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    let m = 0.5 * (-rate * t).exp();
                    DecayPoint { time: t, mean: m, stderr: rel * m, count: 100 }
                })
                .collect(),
        }
    }

    #[test]
    fn recovers_rate() {
        let fit = purification_fit(&series(2.0, 40, 0.01), &FitOptions::default()).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-10);
        assert_eq!(fit.n_points, 40);
        assert!(fit.stderr > 0.0);
    }

    #[test]
    fn flat_series_rejected() {
        match purification_fit(&series(0.0, 40, 0.0), &FitOptions::default()) {
            Err(Error::InsufficientDecay { rate, .. }) => assert!(rate.abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noisy_points_dropped() {
        let mut s = series(1.0, 40, 0.01);
        s.points[20].stderr = s.points[20].mean;
        s.points[20].mean *= 5.0;
        let fit = purification_fit(&s, &FitOptions::default()).unwrap();
        assert_eq!(fit.n_points, 39);
        assert!((fit.rate - 1.0).abs() < 1e-10);
    }
}
