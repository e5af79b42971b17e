use std::path::PathBuf;

use thiserror::Error;
use zoro::ZoroError;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] ZoroError),

    #[error("{}: {message}", .path.display())]
    Config { path: PathBuf, message: String },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        BenchError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Core(ZoroError::Io { .. }) | BenchError::Io { .. } | BenchError::Csv { .. } => "io",
            BenchError::Core(ZoroError::Parse { .. }) | BenchError::Config { .. } => "config",
            BenchError::Core(ZoroError::Evaluation { .. }) => "evaluation",
            BenchError::Core(_) => "invalid",
            BenchError::Usage(_) => "usage",
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "config" => 3,
            "io" => 4,
            _ => 1,
        }
    }

    /// Path the error refers to, if any.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            BenchError::Config { path, .. } | BenchError::Io { path, .. } | BenchError::Csv { path, .. } => Some(path),
            BenchError::Core(ZoroError::Io { path, .. }) | BenchError::Core(ZoroError::Parse { path, .. }) => {
                Some(path)
            }
            _ => None,
        }
    }

    /// One-line JSON rendering for stderr.
    pub fn to_json_line(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("error".into(), self.kind().into());
        obj.insert("message".into(), self.to_string().into());
        if let Some(p) = self.path() {
            obj.insert("path".into(), p.display().to_string().into());
        }
        serde_json::Value::Object(obj).to_string()
    }
}
