//! Sample moments, histograms, a one-sample KS distance and a percentile
//! bootstrap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seed_stream;

/// Minimum sample size accepted by [`pdf_histogram`].
pub const MIN_PDF_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
}

impl SampleMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Moments with large-sample standard errors. Needs at least four samples.
pub fn sample_moments(xs: &[f64]) -> Result<SampleMoments> {
    let count = xs.len();
    if count < 4 {
        return Err(Error::NotEnoughSamples { needed: 4, got: count });
    }
    let n = count as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let variance = m2 * n / (n - 1.0);
    let (skewness, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    let se_skewness = (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt();
    let se_kurtosis = 2.0 * se_skewness * ((n * n - 1.0) / ((n - 3.0) * (n + 5.0))).sqrt();
    Ok(SampleMoments {
        count,
        mean,
        variance,
        skewness,
        excess_kurtosis,
        se_mean: (variance / n).sqrt(),
        se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        se_skewness,
        se_kurtosis,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Equal-width bins on `[lo, lo + width * bins)`; samples outside are
/// counted in `below` / `above` and excluded from the densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
    pub total: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0, "histogram range must be non-empty");
        Self { lo, width: (hi - lo) / bins as f64, counts: vec![0; bins], below: 0, above: 0, total: 0 }
    }

    pub fn from_samples(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut h = Self::new(lo, hi, bins);
        for &x in xs {
            h.add(x);
        }
        h
    }

    pub fn add(&mut self, x: f64) {
        self.total += 1;
        let k = ((x - self.lo) / self.width).floor();
        if k < 0.0 {
            self.below += 1;
        } else if k >= self.counts.len() as f64 {
            self.above += 1;
        } else {
            self.counts[k as usize] += 1;
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.bins() as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.width
    }

    /// Probability mass per bin relative to all samples.
    pub fn masses(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Density normalized by all samples (so it integrates to the in-range fraction).
    pub fn densities(&self) -> Vec<f64> {
        self.masses().into_iter().map(|m| m / self.width).collect()
    }

    /// Bin index of the largest count, searching from the right on ties.
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c >= self.counts[best] {
                best = k;
            }
        }
        best
    }
}

/// `sum |a_k - b_k|` of two per-bin mass vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfHistogram {
    pub histogram: Histogram,
    pub moments: SampleMoments,
}

/// Density histogram over the sample range plus moments.
pub fn pdf_histogram(xs: &[f64], bins: usize) -> Result<PdfHistogram> {
    if xs.len() < MIN_PDF_SAMPLES {
        return Err(Error::NotEnoughSamples { needed: MIN_PDF_SAMPLES, got: xs.len() });
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 1e-9 * (hi - lo) } else { 0.5 };
    let histogram = Histogram::from_samples(xs, lo - pad, hi + pad, bins);
    Ok(PdfHistogram { histogram, moments: sample_moments(xs)? })
}

/// Kolmogorov-Smirnov distance between the sample and `Exp(mean)`.
pub fn ks_exponential(xs: &[f64], mean: f64) -> f64 {
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = 1.0 - (-x.max(0.0) / mean).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Percentile bootstrap: resamples `n_items` indices with replacement
/// `resamples` times and returns the `(1-level)/2` and `(1+level)/2`
/// quantiles of `statistic`.
pub fn bootstrap_ci<F>(n_items: usize, resamples: usize, level: f64, seed: u64, statistic: F) -> (f64, f64)
where
    F: Fn(&[usize]) -> f64,
{
    let mut rng = seed_stream(seed, 0);
    let mut idx = vec![0usize; n_items];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for v in idx.iter_mut() {
                *v = rng.random_range(0..n_items);
            }
            statistic(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (stats.len() - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        if i + 1 < stats.len() {
            stats[i] * (1.0 - f) + stats[i + 1] * f
        } else {
            stats[i]
        }
    };
    (q(0.5 * (1.0 - level)), q(0.5 * (1.0 + level)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn moments_of_known_sample() {
        let m = sample_moments(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert_abs_diff_eq!(m.mean, 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.variance, 12.5, epsilon = 1e-12);
        // deviations -3, -2, -1, 0, 6: m2 = 10, m3 = 36, m4 = 278.8
        assert_abs_diff_eq!(m.skewness, 36.0 / 10f64.powf(1.5), epsilon = 1e-12);
        assert_abs_diff_eq!(m.excess_kurtosis, 2.788 - 3.0, epsilon = 1e-12);
        assert!(sample_moments(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn gaussian_sample_moments() {
        let mut rng = seed_stream(9, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = sample_moments(&xs).unwrap();
        assert!(m.skewness.abs() < 4.0 * m.se_skewness);
        assert!(m.excess_kurtosis.abs() < 4.0 * m.se_kurtosis);
        assert!((m.variance - 1.0).abs() < 4.0 * m.se_variance);
    }

    #[test]
    fn histogram_counts() {
        let h = Histogram::from_samples(&[-1.0, 0.05, 0.15, 0.15, 0.99, 1.0, 2.0], 0.0, 1.0, 10);
        assert_eq!(h.below, 1);
        assert_eq!(h.above, 2);
        assert_eq!(h.counts[1], 2);
        assert_eq!(h.mode_bin(), 1);
        assert_abs_diff_eq!(h.masses().iter().sum::<f64>(), 4.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn pdf_histogram_needs_samples() {
        assert!(matches!(pdf_histogram(&[0.0; 10], 5), Err(Error::NotEnoughSamples { .. })));
        let xs: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        let p = pdf_histogram(&xs, 10).unwrap();
        assert_eq!(p.histogram.counts.iter().sum::<u64>(), 10_000);
        let integral: f64 = p.histogram.densities().iter().sum::<f64>() * p.histogram.width;
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_small_for_exponential_sample() {
        let mut rng = seed_stream(4, 0);
        let e = Exp::new(0.5).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| e.sample(&mut rng)).collect();
        assert!(ks_exponential(&xs, mean(&xs)) < 0.02);
        let uniform: Vec<f64> = (0..10_000).map(|i| i as f64 / 10_000.0).collect();
        assert!(ks_exponential(&uniform, 0.5) > 0.1);
    }

    #[test]
    fn bootstrap_calibration_for_mean() {
        // the 90% interval for the mean of N(1, 1) covers 1 in most repetitions
        let mut covered = 0;
        for rep in 0..100 {
            let mut rng = seed_stream(100, rep);
            let xs: Vec<f64> = (0..200).map(|_| 1.0 + { let z: f64 = StandardNormal.sample(&mut rng); z }).collect();
            let (lo, hi) = bootstrap_ci(xs.len(), 400, 0.95, rep, |idx| idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64);
            if lo <= 1.0 && 1.0 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 90, "{covered}");
    }
}
