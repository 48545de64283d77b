use std::path::PathBuf;

use thiserror::Error;

/// Everything a command can fail with, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] spin_collapse::Error),
}

impl CliError {
    pub const EXIT_OTHER: i32 = 1;
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_VALIDATION: i32 = 3;
    pub const EXIT_IO: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Validation(_) => Self::EXIT_VALIDATION,
            CliError::Io { .. } => Self::EXIT_IO,
            // Bad parameters surface from the model as well as from the parser.
            CliError::Model(spin_collapse::Error::InvalidParameter { .. }) => Self::EXIT_CONFIG,
            CliError::Model(_) => Self::EXIT_OTHER,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
