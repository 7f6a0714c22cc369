use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar parameter (temperature, epsilon, lambda, rank, ...) is out of range.
    InvalidParameter(String),
    /// Structurally invalid input data (empty sets, non-finite values, bad labels).
    InvalidInput(String),
    /// Two vectors that must share a class count do not.
    DimensionMismatch { expected: usize, found: usize },
    /// A token has no image under a unit map.
    UnmappedToken(String),
    /// Teacher posterior count does not match the deduplicated label count.
    LengthMismatch { posteriors: usize, labels: usize },
    /// A training configuration is missing something its method needs.
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::UnmappedToken(tok) => write!(f, "token `{tok}` is missing from the unit map"),
            Error::LengthMismatch { posteriors, labels } => write!(
                f,
                "teacher supplied {posteriors} posteriors for {labels} deduplicated labels"
            ),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
