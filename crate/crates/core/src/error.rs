use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sketch Gram matrix is numerically singular")]
    SingularGram,

    #[error("cubic subproblem solver did not converge in {0} iterations")]
    InnerSolverFailure(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
