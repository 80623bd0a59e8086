use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("densities live on different domains")]
    DomainMismatch,
    #[error("probability {0} is not in (0, 1)")]
    InvalidProbability(f64),
    #[error("epsilon {0} is not in (0, 1/2)")]
    InvalidEpsilon(f64),
    #[error("{got} samples given, at least {need} required")]
    TooFewSamples { got: usize, need: usize },
    #[error("level code {0} outside the level set")]
    OutOfRange(i64),
    #[error("cell has non-positive length")]
    DegenerateCell,
    #[error("point {0} is outside the support")]
    OutOfSupport(f64),
    #[error("density has no finite mode")]
    NonfiniteMode,
    #[error("interval violates the linearization hypothesis: {0}")]
    HypothesisViolated(String),
    #[error("enumeration of {0} candidates exceeds the brute-force budget")]
    TooLarge(u128),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
