use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter set that can never be valid (even window, edge above Nyquist, ...).
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Input data that does not satisfy an operation's precondition.
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}; first non-finite tensor: {tensor}")]
    NonFinite { epoch: usize, tensor: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("frame decode: {0}")]
    Frame(String),

    #[error("action rejected: {0}")]
    Action(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("session: {0}")]
    Session(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from invalid user-supplied input or configuration
    /// rather than a failure while running. The CLI maps this to exit code 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::RejectedInput(_)
                | Error::Shape { .. }
                | Error::Config(_)
                | Error::Toml(_)
        )
    }
}
