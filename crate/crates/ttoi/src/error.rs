use thiserror::Error;

/// Errors produced by the tensor-train toolkit.
#[derive(Error, Debug)]
pub enum Error {
    /// Invalid argument (bad shapes, out-of-range indices, infeasible ranks).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Requested object would exceed addressable size.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Non-finite values or a numerically failed computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An iteration state was used at the wrong parity / stage.
    #[error("state error: {0}")]
    State(String),

    /// Malformed on-disk data; `offset` is the byte position of the problem.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Process exit code for the CLI: 0 ok, 1 i/o, 2 argument, 3 format, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Resource(_) | Error::State(_) => 2,
            Error::Format { .. } => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
