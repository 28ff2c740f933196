//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset handling, training, and serialization.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (contradictory options, bad hyperparameters,
    /// incompatible network dimensions).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input data passed to an operation.
    #[error("input error: {0}")]
    Input(String),

    /// Dataset failed a validity check.
    #[error("validation error: {0}")]
    Validation(String),

    /// Operation called in the wrong order or with stale state.
    #[error("state error: {0}")]
    State(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Synthetic data generation could not satisfy the requested spec.
    #[error("generation error: {0}")]
    Generation(String),

    /// Partial-label simulation failed the dataset validity premise.
    #[error("partition error: {0}")]
    Partition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
