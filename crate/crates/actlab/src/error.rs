use std::path::{Path, PathBuf};

use crate::checkpoint_file::CheckpointError;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Success = 0,
    Other = 1,
    Config = 2,
    NumericAbort = 3,
    Io = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{message} (offending batch written to {})", dump.display())]
    NumericAbort { message: String, dump: PathBuf },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
    #[error(transparent)]
    Core(actlab_core::Error),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Config(_) => ExitCode::Config,
            AppError::NumericAbort { .. } => ExitCode::NumericAbort,
            AppError::Io { .. } | AppError::Checkpoint { .. } => ExitCode::Io,
            AppError::Core(e) => match e {
                actlab_core::Error::Config(_) | actlab_core::Error::Layout(_) => ExitCode::Config,
                actlab_core::Error::NumericAbort { .. } | actlab_core::Error::NumericDomain(_) => {
                    ExitCode::NumericAbort
                }
            },
            AppError::Other(_) => ExitCode::Other,
        }
    }
}

impl From<actlab_core::Error> for AppError {
    fn from(e: actlab_core::Error) -> Self {
        AppError::Core(e)
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
