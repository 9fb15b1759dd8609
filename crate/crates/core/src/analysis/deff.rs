//! Effective diffusion constant from the growth of the ensemble variance of X.

use serde::{Deserialize, Serialize};

use super::stats::bootstrap_ci;
use crate::error::{invalid, Error, Result};

/// Window must span at least this many mean inter-flip times.
pub const WINDOW_FLIP_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeffOptions {
    pub t_start: f64,
    pub t_end: f64,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl DeffOptions {
    pub fn window(t_start: f64, t_end: f64) -> Self {
        Self { t_start, t_end, resamples: 200, level: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeffEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_trajectories: usize,
    pub n_times: usize,
}

/// Ordinary least-squares slope of `ys` on `ts`.
pub fn ols_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    sxy / sxx
}

fn variance_slope(times: &[f64], cols: &[usize], xs: &[Vec<f64>], rows: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let vars: Vec<f64> = cols
        .iter()
        .map(|&j| {
            let (mut s, mut s2) = (0.0, 0.0);
            for &i in rows {
                let v = xs[i][j];
                s += v;
                s2 += v * v;
            }
            let m = s / n;
            (s2 - n * m * m) / (n - 1.0)
        })
        .collect();
    let ts: Vec<f64> = cols.iter().map(|&j| times[j]).collect();
    ols_slope(&ts, &vars)
}

/// Fits `Var(X_t)` against `t` over the window, `xs[i][j]` being trajectory
/// `i` at `times[j]`. With `mean_flip_time` given, the window must cover at
/// least [`WINDOW_FLIP_FACTOR`] of them.
pub fn estimate_deff(times: &[f64], xs: &[Vec<f64>], opts: &DeffOptions, mean_flip_time: Option<f64>) -> Result<DeffEstimate> {
    let span = opts.t_end - opts.t_start;
    if !(span > 0.0) {
        return Err(invalid("t_end", "window must have positive length"));
    }
    if let Some(tf) = mean_flip_time.filter(|t| t.is_finite()) {
        if span < WINDOW_FLIP_FACTOR * tf {
            return Err(Error::WindowTooShort { window: span, mean_flip_time: tf });
        }
    }
    if xs.len() < 3 {
        return Err(Error::NotEnoughSamples { needed: 3, got: xs.len() });
    }
    if xs.iter().any(|row| row.len() != times.len()) {
        return Err(invalid("xs", "every trajectory needs one value per time"));
    }
    let cols: Vec<usize> = (0..times.len()).filter(|&j| times[j] >= opts.t_start - 1e-12 && times[j] <= opts.t_end + 1e-12).collect();
    if cols.len() < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: cols.len() });
    }
    let all: Vec<usize> = (0..xs.len()).collect();
    let value = variance_slope(times, &cols, xs, &all);
    let (ci_low, ci_high) = bootstrap_ci(xs.len(), opts.resamples, opts.level, opts.seed, |rows| variance_slope(times, &cols, xs, rows));
    Ok(DeffEstimate { value, ci_low, ci_high, n_trajectories: xs.len(), n_times: cols.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_stream;
    use rand_distr::{Distribution, StandardNormal};

    fn brownian(n: usize, steps: usize, dt: f64, d: f64, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let xs = (0..n)
            .map(|i| {
                let mut rng = seed_stream(seed, i as u64);
                let mut x = 0.0;
                let mut row = vec![0.0];
                for _ in 0..steps {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x += (d * dt).sqrt() * z;
                    row.push(x);
                }
                row
            })
            .collect();
        (times, xs)
    }

    #[test]
    fn slope_of_line() {
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn brownian_deff() {
        let (times, xs) = brownian(2_000, 50, 0.2, 1.0, 3);
        let est = estimate_deff(&times, &xs, &DeffOptions::window(2.0, 10.0), None).unwrap();
        assert!((est.value - 1.0).abs() < 0.1, "{est:?}");
        assert!(est.ci_low < est.value && est.value < est.ci_high);
    }

    #[test]
    fn window_too_short() {
        let (times, xs) = brownian(10, 10, 1.0, 1.0, 1);
        let r = estimate_deff(&times, &xs, &DeffOptions::window(0.0, 10.0), Some(1.0));
        assert!(matches!(r, Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn bootstrap_ci_calibration() {
        // synthetic Gaussian trajectories with known D = 2: the CI covers it in >= 90 of 100 repetitions
        let mut hits = 0;
        for rep in 0..100 {
            let (times, xs) = brownian(300, 10, 1.0, 2.0, 1000 + rep);
            let mut opts = DeffOptions::window(1.0, 10.0);
            opts.seed = rep;
            let est = estimate_deff(&times, &xs, &opts, None).unwrap();
            if est.ci_low <= 2.0 && 2.0 <= est.ci_high {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}");
    }
}
