use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("grid is not uniform (step {step} differs from {expected} at index {index})")]
    NonUniformGrid { index: usize, step: f64, expected: f64 },

    #[error("degenerate range: {0}")]
    DegenerateRange(String),

    #[error("steady state is not unique: numerical null space has dimension {dim}")]
    DegenerateSteadyState { dim: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("requested superoperator needs ~{required_mb} MB, budget is {budget_mb} MB")]
    Resource { required_mb: u64, budget_mb: u64 },

    #[error("step size error: {0}")]
    StepSize(String),

    #[error("no minimum: {0}")]
    NoMinimum(String),

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(err: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
