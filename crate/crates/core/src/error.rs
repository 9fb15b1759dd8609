use thiserror::Error;

/// Errors raised by the simulation and estimation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate Kraus parameters: all of (u, v, r, s) are zero")]
    DegenerateKraus,

    #[error("Kraus pair violates B+^dag B+ + B-^dag B- = I (residual {residual:e})")]
    NotUnitary { residual: f64 },

    #[error("epsilon too large: renormalization matrix is not positive definite")]
    EpsilonTooLarge,

    #[error("degenerate branch: outcome probability {probability:e} below floor")]
    DegenerateBranch { probability: f64 },

    #[error("state blow-up: Bloch norm {norm} at t = {t}")]
    StateBlowUp { norm: f64, t: f64 },

    #[error("CFL violation: dt = {dt:e} exceeds stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("mass leak: boundary flux {flux:e} relative to total mass")]
    MassLeak { flux: f64 },

    #[error("no barrier: a^2 = {a2} does not exceed omega0 = {omega0}")]
    NoBarrier { a2: f64, omega0: f64 },

    #[error("window too short: {window} < 20 x mean flip time {mean_flip_time}")]
    WindowTooShort { window: f64, mean_flip_time: f64 },

    #[error("insufficient decay: series dropped only by a factor {ratio:.3} (fitted rate {rate:e} +/- {stderr:e})")]
    InsufficientDecay { ratio: f64, rate: f64, stderr: f64 },

    #[error("x = {x} outside the support [-{t}, {t}]")]
    OutsideSupport { x: f64, t: f64 },

    #[error("not enough samples: need {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
