use std::path::{Path, PathBuf};

use crate::format::ParseError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_TRIVIAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("trivial case: {0}")]
    Trivial(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Core(betadelta_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Trivial(_) => EXIT_TRIVIAL,
            CliError::Io { .. } | CliError::Format { .. } => EXIT_IO,
            CliError::Core(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl From<betadelta_core::Error> for CliError {
    fn from(e: betadelta_core::Error) -> Self {
        use betadelta_core::Error as E;
        match e {
            E::TrivialCase { .. } => CliError::Trivial(e.to_string()),
            E::NotConverged { .. } | E::RootBracket { .. } => CliError::NotConverged(e.to_string()),
            E::InvalidArgument(_) | E::Dimension(_) => CliError::Usage(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
