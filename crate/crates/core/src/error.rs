use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ZoroError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ZoroError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The objective returned a non-finite value or failed outright.
    #[error("evaluation failure{}: {message}", .query.map(|q| format!(" at query {q}")).unwrap_or_default())]
    Evaluation { query: Option<u64>, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}:{line}:{column}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ZoroError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ZoroError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches the index of the offending oracle query to an evaluation error.
    pub(crate) fn at_query(self, query: u64) -> Self {
        match self {
            ZoroError::Evaluation { message, .. } => ZoroError::Evaluation {
                query: Some(query),
                message,
            },
            ZoroError::Domain(message) => ZoroError::Evaluation {
                query: Some(query),
                message: format!("domain error: {message}"),
            },
            other => other,
        }
    }
}
