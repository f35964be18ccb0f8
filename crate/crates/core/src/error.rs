//! Error type shared by every module in the crate.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures the library can report.
///
/// The split between [`Error::InvalidInput`] and [`Error::InvalidConfig`]
/// matters to the CLI: bad data (unparsable files, non-finite values, shape
/// mismatches) maps to exit code 2, while a configuration that cannot be
/// satisfied (e.g. more subsequences than the sequence supports) maps to
/// exit code 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a precondition (shape, range, finiteness).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration parameters are inconsistent with each other or the data.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A file could not be parsed; `line` and `column` are 1-based.
    #[error("parse error in {path}: line {line}, column {column}: {message}")]
    Parse {
        /// File that failed to parse.
        path: PathBuf,
        /// 1-based line number of the offending record.
        line: u64,
        /// 1-based column (field) number within the line.
        column: usize,
        /// Human-readable description of the failure.
        message: String,
    },

    /// An OS-level I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        /// File or directory the operation touched.
        path: PathBuf,
        /// Underlying OS error.
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Builds an [`Error::InvalidInput`] from anything displayable.
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Builds an [`Error::InvalidConfig`] from anything displayable.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Builds an [`Error::Io`] carrying the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI uses for this error.
    ///
    /// Input and parse problems yield 2; configuration problems yield 3.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_) => 3,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Io { .. } => 2,
        }
    }
}
