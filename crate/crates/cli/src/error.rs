use std::path::Path;

use fpqr::FpqrError;
use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unparsable input, or data that violates a precondition.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// Library error raised during `stage`; invalid input maps to a usage
    /// error, everything else to a numerical failure.
    pub fn stage(stage: &str, err: FpqrError) -> Self {
        match err {
            FpqrError::InvalidInput(m) => CliError::Usage(format!("{stage}: {m}")),
            other => CliError::Numerical(format!("{stage}: {other}")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}
