use thiserror::Error;

/// Errors produced by the co-design pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("insufficient stream length: {required} samples required, {available} available")]
    InsufficientStream { required: usize, available: usize },

    #[error("point {index} lies beyond the reference point")]
    BeyondReference { index: usize },

    #[error("{failed} of {total} trials failed, more than the failure budget allows")]
    FailureBudget { failed: usize, total: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
