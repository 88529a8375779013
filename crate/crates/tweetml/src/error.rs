//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("unknown label name {0:?}")]
    UnknownLabel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input data: {0}")]
    InvalidData(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("vocabulary mismatch: model was built against a different vocabulary (hash {expected:#018x}, got {found:#018x})")]
    VocabularyMismatch { expected: u64, found: u64 },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for validation problems the user can
    /// fix (bad config, bad files, unknown labels), 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::MalformedRecord { .. }
            | Error::UnknownLabel(_)
            | Error::InvalidConfig(_)
            | Error::InvalidData(_)
            | Error::VocabularyMismatch { .. } => 1,
            Error::Training(_) => 2,
        }
    }
}
