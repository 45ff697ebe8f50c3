use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("two-level rotation needs distinct levels, got {0} twice")]
    SameLevel(usize),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary (max |U^dag U - I| = {0:e})")]
    NotUnitary(f64),

    #[error("non-finite amplitude at index {0}")]
    NonFinite(usize),

    #[error("probabilities sum to {0}, outside the renormalization window")]
    ProbabilityDrift(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("environment generation failed: {0}")]
    Environment(String),

    #[error("trial {trial} (epsilon index {epsilon_index}): {source}")]
    Trial {
        epsilon_index: usize,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed results: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
