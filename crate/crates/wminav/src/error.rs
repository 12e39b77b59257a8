//! Error type shared by every module in the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// The CLI maps these onto process exit codes: configuration and usage
/// problems exit 1, data/schema problems exit 2, numeric failures exit 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frame mismatch: expected {expected}, got {got}")]
    FrameMismatch { expected: &'static str, got: &'static str },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("time ordering error: {0}")]
    Ordering(String),

    #[error("synchronization failure: {0}")]
    SyncFailure(String),

    #[error("window contiguity error: {0}")]
    Contiguity(String),

    #[error("numeric divergence at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Shape(_)
            | Error::EmptyInput(_)
            | Error::FrameMismatch { .. }
            | Error::Schema(_)
            | Error::Ordering(_)
            | Error::SyncFailure(_)
            | Error::Contiguity(_)
            | Error::Parse(_)
            | Error::Io { .. } => 2,
            Error::InvalidState(_) | Error::Divergence { .. } => 3,
        }
    }
}
