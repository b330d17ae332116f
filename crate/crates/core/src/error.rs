use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix shapes that cannot be combined.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("degenerate statistics: {0}")]
    ZeroStd(String),

    /// Text input (metadata CSV, run configuration) that does not parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Binary input (WAV, feature cache, checkpoint) that does not decode.
    #[error("decode error at byte offset {offset}: {message}")]
    Decode { offset: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn decode(offset: u64, msg: impl Into<String>) -> Self {
        Error::Decode {
            offset,
            message: msg.into(),
        }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user input (arguments, configuration,
    /// malformed files) as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Decode { .. } => true,
            Error::File { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
