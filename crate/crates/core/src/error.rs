use thiserror::Error;

use crate::solver::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resolution: need at least 2 cells per direction, got {0}")]
    InvalidResolution(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("discrete function does not live on this mesh")]
    IncompatibleFunction,

    #[error("operation requires a nonzero function")]
    ZeroFunction,

    #[error("function is not sign-changing (positive part zero: {positive_zero}, negative part zero: {negative_zero})")]
    NotSignChanging {
        positive_zero: bool,
        negative_zero: bool,
    },

    #[error("Nehari projection failed: {0}")]
    ProjectionFailure(String),

    #[error("initial guess is not sign-changing")]
    InvalidInit,

    #[error("a sign part of the iterate collapsed at iteration {iteration}")]
    DegenerateIterate { iteration: usize },

    #[error("no convergence after {iterations} iterations (best estimate {best})")]
    ConvergenceFailure { iterations: usize, best: f64 },

    #[error("all {starts} starts failed")]
    AllStartsFailed {
        starts: usize,
        best: Option<Box<Solution>>,
    },

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty data")]
    EmptyData,

    #[error("unsupported schema version {0}")]
    Schema(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
