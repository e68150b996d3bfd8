use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("image sequence not certified after {iterations} terms (tail/Q = {ratio:e})")]
    Convergence { iterations: usize, ratio: f64 },

    #[error("linear solve failed: {reason} (condition estimate {condition:e})")]
    Solver { reason: String, condition: f64 },

    #[error("accuracy target missed: {0}")]
    Accuracy(String),

    #[error("coefficient A undefined: |∫u^i| = {0:e}; use the frequency part directly")]
    UndefinedCoefficient(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
