use thiserror::Error;

/// Errors raised by the assimilation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid state vector: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not symmetric positive definite")]
    SingularCovariance,

    #[error("innovation covariance HQH^T + R is numerically singular")]
    SingularInnovation,

    #[error("all weights are zero; cannot normalize")]
    DegenerateWeights,

    #[error("posterior density integrates to zero on the grid")]
    DegeneratePosterior,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
