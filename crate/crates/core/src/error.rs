//! Error type shared across the crate.

use std::fmt;
use std::io;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A caller violated an operation's precondition.
    InvalidInput(String),
    /// A zero-norm vector was passed where a direction is required.
    DegenerateVector(String),
    /// A record in a text input could not be parsed. Lines are 1-based.
    Parse { line: usize, message: String },
    /// Filesystem error, annotated with the path involved.
    Io { path: PathBuf, source: io::Error },
    /// A serialized container was malformed or of an unsupported version.
    Format(String),
    /// Training produced a non-finite loss.
    TrainingFailure(String),
    /// A checkpoint or perturbation does not match the vocabulary in use.
    VocabMismatch { expected: u64, found: u64 },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DegenerateVector(msg) => write!(f, "degenerate vector: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Format(msg) => write!(f, "malformed file: {msg}"),
            Error::TrainingFailure(msg) => write!(f, "training failure: {msg}"),
            Error::VocabMismatch { expected, found } => write!(
                f,
                "vocabulary hash mismatch: file was built against {expected:016x}, \
                 current vocabulary hashes to {found:016x}"
            ),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
