use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A record could not be decoded. `location` is a 1-based line number for
    /// text formats and a byte offset for binary ones.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("insufficient event data: missing span [{missing_start}, {missing_end}) us")]
    InsufficientData { missing_start: u64, missing_end: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse_line(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { location: format!("line {line}"), message: msg.into() }
    }

    pub(crate) fn parse_offset(offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse { location: format!("byte offset {offset}"), message: msg.into() }
    }
}
