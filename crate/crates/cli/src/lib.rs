//! Configuration, presets and run orchestration for the `oqrw` binary.
//!
//! A run directory `<out>/<label>/` holds `config_seed<S>.toml`,
//! `manifest_seed<S>.json` and the mode's data files:
//!
//! | file | columns |
//! |------|---------|
//! | `trajectory_<i>_seed<S>.csv` | `t_or_n, x, q1, q2, q3, sqrt_det` |
//! | `flips_seed<S>.csv` | `trajectory_id, flip_time, direction` |
//! | `samples_seed<S>.csv` | `trajectory_id, t, x, q3` |
//! | `field_t<T>_seed<S>.csv` | `x, p, q1_density, q2_density, q3_density` |
//! | `histogram_*_seed<S>.csv` | `x, density, count` |
//! | `decay_seed<S>.csv` | `t_or_n, mean_sqrt_det, stderr, count` |
//! | `summary_seed<S>.json` | estimator name to result |

pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, Mode, ModelSpec, Rho0Spec};
pub use error::{CliError, CliResult};
pub use manifest::{RunManifest, RunStatus};
pub use oqrw_core::rng::seed_stream;
pub use run::{run, RunOutcome};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "OQRW_OUT";
