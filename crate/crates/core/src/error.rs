use thiserror::Error;

/// Errors raised by model construction and the estimators built on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("noise level must lie in (0, 1), got {0}")]
    NoiseLevel(f64),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value at index {index} must be strictly positive, got {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("decay parameter must be non-negative and finite, got {0}")]
    Decay(f64),
    #[error("dimension {m} outside 1..={max}")]
    Dimension { m: usize, max: usize },
    #[error("inverse squared operator value overflows at index {index}")]
    Overflow { index: usize },
    #[error("dimension prior is undefined under an improper prior (coordinate {index})")]
    ImproperPrior { index: usize },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::NoiseLevel(eps))
    }
}

pub(crate) fn check_dim(m: usize, max: usize) -> Result<()> {
    if m >= 1 && m <= max {
        Ok(())
    } else {
        Err(Error::Dimension { m, max })
    }
}
