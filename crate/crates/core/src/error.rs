use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes are inconsistent.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A NaN or infinity showed up where only finite values are legal.
    #[error("numeric error in `{ident}`: {msg}")]
    Numeric { ident: String, msg: String },

    /// An invariant of a domain type was violated (e.g. weights off the simplex).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// An operation was called in the wrong order.
    #[error("state error: {0}")]
    State(String),

    /// Dataset files or rows are malformed.
    #[error("data error at line {line}: {msg}")]
    Data { line: u64, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn numeric(ident: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Numeric {
            ident: ident.into(),
            msg: msg.into(),
        }
    }
}
