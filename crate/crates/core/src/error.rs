use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a data contract (schema, cross-reference, arity).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{file}: {path}: {reason}")]
    Schema {
        file: PathBuf,
        path: String,
        reason: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("no content words in question {question:?}")]
    NoKeywords { question: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation-class failures map to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Schema { .. } | Error::Degenerate(_) | Error::NoKeywords { .. }
        )
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
