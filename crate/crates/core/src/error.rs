use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value fell outside the domain of an operation (non-finite input,
    /// a mean parameter outside the image of the mean map, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller broke an operation's contract (shape mismatch, empty input).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A derivative order above what the functional provides analytically.
    #[error("derivative of order {order} not available analytically (max {max})")]
    UnsupportedOrder { order: usize, max: usize },
    /// The requested operation is not defined for this model or family.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Invalid configuration, naming the offending field.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    /// An iterative solver failed to converge.
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
