use thiserror::Error;

/// Errors produced by the estimation, simulation and trading routines.
#[derive(Debug, Error)]
pub enum CmarError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("covariance not positive definite: {0}")]
    Covariance(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model generation failed: {0} draws rejected")]
    Generation(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CmarError>;
