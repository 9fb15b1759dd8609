//! Estimators over trajectory ensembles and grid fields.

pub mod deff;
pub mod mfpt;
pub mod purification;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use deff::{estimate_deff, DeffEstimate, DeffOptions};
pub use mfpt::{kramers_candidates, mfpt_oracle, simulate_escape_times, MfptSpec};
pub use purification::{purification_fit, DecayFit, FitOptions};
pub use stats::{bootstrap_ci, ks_exponential, pdf_histogram, sample_moments, Histogram, PdfHistogram, SampleMoments};

use crate::error::Result;
use crate::record::{DecaySeries, FlipRecord};

/// Moments of `X` across the ensemble at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMoments {
    pub time: f64,
    pub moments: SampleMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipTimeStats {
    pub count: usize,
    pub mean: f64,
    pub histogram: Histogram,
    /// KS distance to an exponential of the same mean (a consistency check only).
    pub ks_exponential: f64,
}

/// Inter-flip statistics pooled over trajectories; the time to the first
/// flip of each trajectory is excluded. `None` with fewer than two intervals.
pub fn flip_time_stats(records: &[FlipRecord], bins: usize) -> Option<FlipTimeStats> {
    let sample: Vec<f64> = records.iter().flat_map(|r| r.inter_flip_times()).collect();
    if sample.len() < 2 {
        return None;
    }
    let mean = stats::mean(&sample);
    let hi = sample.iter().copied().fold(0.0, f64::max);
    Some(FlipTimeStats {
        count: sample.len(),
        mean,
        histogram: Histogram::from_samples(&sample, 0.0, hi * (1.0 + 1e-9), bins.max(1)),
        ks_exponential: ks_exponential(&sample, mean),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationSummary {
    pub series: DecaySeries,
    pub fit: Option<DecayFit>,
    pub predicted_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeffSummary {
    pub estimate: DeffEstimate,
    pub predicted: f64,
}

/// Everything the estimators report about one ensemble.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub position_moments: Vec<TimeMoments>,
    pub purification: Option<PurificationSummary>,
    pub flip_times: Option<FlipTimeStats>,
    pub effective_diffusion: Option<DeffSummary>,
}

/// Per-time moments of `xs[i][j]` (trajectory `i`, time `j`).
pub fn position_moments(times: &[f64], xs: &[Vec<f64>]) -> Result<Vec<TimeMoments>> {
    times
        .iter()
        .enumerate()
        .map(|(j, &time)| {
            let col: Vec<f64> = xs.iter().map(|row| row[j]).collect();
            Ok(TimeMoments { time, moments: sample_moments(&col)? })
        })
        .collect()
}
