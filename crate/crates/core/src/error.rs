use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel {channel} has (near) zero variance")]
    ConstantChannel { channel: usize },

    #[error("series of length {len} is too short for maximum lag {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },

    #[error("not enough neighbors for point {point}: need {needed}, {available} admissible")]
    NotEnoughNeighbors {
        point: usize,
        needed: usize,
        available: usize,
    },

    #[error("digamma is undefined for x = {0}")]
    DomainError(f64),

    #[error("covariance matrix is numerically singular (condition number {condition:e})")]
    SingularCovariance { condition: f64 },

    #[error("mean squared residual {0:e} is degenerate")]
    DegenerateResidual(f64),

    #[error("no candidates left to select from")]
    EmptyPool,

    #[error("matrix shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("Henon map diverged after {restarts} restarts")]
    Diverged { restarts: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.kind() {
            csv::ErrorKind::Io(_) => Error::Io(err.to_string()),
            _ => Error::Csv(err.to_string()),
        }
    }
}
