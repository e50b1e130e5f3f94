//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty training set: at least one pattern/target column is required")]
    EmptyModel,

    #[error("normalizer has never observed a value")]
    UnobservedNormalizer,

    #[error("non-finite input value: {0}")]
    NonFinite(f64),

    #[error("cold start: need {needed} frames of history, have {available}")]
    ColdStart { needed: usize, available: usize },

    #[error("insufficient data: have {have} training columns, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("non-contiguous frame timestamp: expected t = {expected}, got t = {got}")]
    Sequence { expected: u64, got: u64 },

    #[error("trace too short: {len} frames, need more than {min}")]
    TraceTooShort { len: usize, min: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("trace schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
