use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI job. Each variant has its own exit code; see [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] maxsurf::Error),
}

/// Exit code of a run whose requested checks did not all pass.
pub const EXIT_CHECK_FAILED: i32 = 1;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// 0 is success, 1 a failed check and 2 a command-line parse error (from clap); every
    /// error source gets its own code from 3 on.
    pub fn exit_code(&self) -> i32 {
        use maxsurf::Error as E;
        match self {
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Format { .. } => 5,
            CliError::Core(e) => match e {
                E::DimensionMismatch { .. } => 6,
                E::Geometry(_) => 7,
                E::Loop(_) => 8,
                E::Surface(_) => 9,
                E::Solver(_) => 10,
                E::Verify(_) => 11,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
