use thiserror::Error;

/// Errors raised by the detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or rank deficient (|r_{index}{index}| = {pivot:e})")]
    Singular { index: usize, pivot: f64 },

    #[error("value {value} is not a point of the {constellation} alphabet")]
    NotInAlphabet {
        value: f64,
        constellation: &'static str,
    },

    #[error("search space of {size} candidates exceeds the limit of {limit}")]
    SizeGuard { size: f64, limit: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
