use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    #[error("replay buffer holds {available} experiences, {requested} requested")]
    BufferUnderflow { available: usize, requested: usize },

    #[error("problem too large: {0}")]
    Size(String),

    #[error("incompatible widths: checkpoint expects {expected}, environment provides {found}")]
    Compatibility { expected: usize, found: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
