//! Simulation toolkit for open quantum random walks on the line.

pub mod analysis;
pub mod discrete;
pub mod flips;
pub mod fokker_planck;
pub mod potential;
pub mod sde;
pub mod ensemble;
pub mod error;
pub mod record;
pub mod rng;
pub mod spin;
pub mod telegraph;

pub use error::{Error, Result};
pub use record::{DecayPoint, DecaySeries, FlipDirection, FlipRecord, Outcome, TrajectoryRecord};
pub use spin::{BlochState, Complex2x2, KrausPair, KrausParamsUvrs, ModelParams, ScalingParams};
