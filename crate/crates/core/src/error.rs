use crate::dag::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid DAG: {0}")]
    InvalidDag(ValidationReport),

    #[error("malformed DAG document: {0}")]
    MalformedDag(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("deadlock at step {step}: no runnable node, blocked frontier {frontier:?}")]
    Deadlock { step: u64, frontier: Vec<usize> },

    #[error("script error on processor {processor} at step {step}: {reason}")]
    Script {
        processor: usize,
        step: u64,
        reason: String,
    },

    #[error("trace does not match DAG: {0}")]
    TraceMismatch(String),

    #[error("cache configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
