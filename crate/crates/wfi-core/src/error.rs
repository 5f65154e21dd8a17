//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A grid/field/network dimension constraint was violated.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A region label was out of range or a region map is inconsistent.
    #[error("region error: {0}")]
    Region(String),

    /// An argument was outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A required derivative field is missing from a dataset record.
    #[error("missing derivative field ∂^({0},{1})")]
    MissingDerivative(u8, u8),

    /// Training diverged (non-finite loss) at the given epoch.
    #[error("numerical abort at epoch {epoch}: {detail}")]
    Numerical { epoch: usize, detail: String },

    /// A configuration / manifest / checkpoint file failed to parse.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// A configuration value was missing or had the wrong type.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            line,
            detail: detail.into(),
        }
    }
}
