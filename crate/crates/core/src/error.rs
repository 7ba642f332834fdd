use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("y4m parse error at byte {offset}: {message}")]
    Y4mHeader { offset: u64, message: String },

    #[error("y4m frame {index} is truncated: {message}")]
    Y4mTruncated { index: usize, message: String },

    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing video ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("model version mismatch: expected {expected}, found {found}")]
    ModelVersion { expected: String, found: String },

    #[error("SMO did not converge after {iterations} iterations (max violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown {kind} `{name}` (available: {})", .available.join(", "))]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
