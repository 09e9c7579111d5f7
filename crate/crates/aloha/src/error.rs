use std::path::{Path, PathBuf};

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numeric(_) => 3,
            AppError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Config(_) => "config",
            AppError::Numeric(_) => "numeric",
            AppError::Io { .. } => "io",
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() })
    }
}

impl From<aloha_core::Error> for AppError {
    fn from(e: aloha_core::Error) -> Self {
        if e.is_numeric() {
            AppError::Numeric(e.to_string())
        } else {
            AppError::Config(e.to_string())
        }
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> AppError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => AppError::io(path, source),
            other => AppError::config(format!("{}: {other:?}", path.display())),
        }
    } else {
        AppError::config(format!("{}: {e}", path.display()))
    }
}
