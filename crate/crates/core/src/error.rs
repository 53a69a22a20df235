use thiserror::Error;

/// Errors raised by the numerical modules and the command layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has zero mass")]
    ZeroMass,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("non-finite energy at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("backtracking exhausted after {halvings} halvings at iteration {iteration}")]
    BacktrackingExhausted { iteration: usize, halvings: usize },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
