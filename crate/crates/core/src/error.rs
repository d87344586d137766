use thiserror::Error;

use crate::model::Scheme;
use crate::prox::SolveError;

/// Errors raised by the stepping schemes, the model spaces and the diagnostics.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("inner solve failed: {0}")]
    InnerSolveFailed(#[from] SolveError),

    #[error("step size {tau} must lie in (0, {tau_star})")]
    StepTooLarge { tau: f64, tau_star: f64 },

    #[error("step {k} failed: {source}")]
    StepFailed {
        k: usize,
        #[source]
        source: Box<FlowError>,
    },

    #[error("{scheme} run at tau = {tau:?} failed: {source}")]
    RunFailed {
        scheme: Scheme,
        tau: f64,
        #[source]
        source: Box<FlowError>,
    },

    #[error("state produced at step {k} is not admissible")]
    Inadmissible { k: usize },

    #[error("time {t} lies outside [0, {end}]")]
    OutOfRange { t: f64, end: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("points are (nearly) antipodal; logarithm undefined")]
    AntipodalPoint,

    #[error("inverse distribution function is not strictly increasing")]
    NonMonotone,

    #[error("sampled initial datum is not monotone or leaves [-1, 1]")]
    InitialNotMonotone,

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T, E = FlowError> = std::result::Result<T, E>;
