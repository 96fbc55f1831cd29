use std::io;

use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps [`Error::Usage`] to exit code 1 and every data or format
/// problem to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (bad `k`, mismatched
    /// dimensions, empty input, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A file could not be decoded. `offset` is the byte position at which
    /// decoding failed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A loaded or built structure violates one of its invariants.
    #[error("invalid data: {0}")]
    Invalid(String),

    /// Something that must not happen did (e.g. a graft pass left nodes
    /// unreachable).
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Returns `true` for errors caused by the caller's arguments rather than
    /// by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
