use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("invalid probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("axis {0} is out of range")]
    AxisOutOfRange(usize),

    #[error("axis {0} appears in more than one axis set")]
    OverlappingAxes(usize),

    #[error("axis set must be nonempty")]
    EmptyAxisSet,

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("configuration carries no tilde-block distribution")]
    MissingTilde,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
