//! CLI error type with the stable exit-code contract:
//! 0 success, 2 config error, 3 numeric error, 4 I/O error.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {}", path.display(), err))
    }
}

impl From<iaat_core::Error> for CliError {
    fn from(err: iaat_core::Error) -> Self {
        match err {
            iaat_core::Error::NonFinite(what) => CliError::Numeric(what),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
