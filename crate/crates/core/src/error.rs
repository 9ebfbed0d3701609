use thiserror::Error;

/// Errors raised by the forecasting toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid index {0}: linear indices start at 1")]
    InvalidIndex(i64),
    #[error("invalid year-month ({year}, {month})")]
    InvalidYearMonth { year: i64, month: i64 },
    #[error("lag reaches before the first observation (index {0})")]
    OutOfHistory(i64),
    #[error("degenerate trend design: {0} years, need at least 3")]
    DegenerateDesign(usize),
    #[error("candidate value at position {0} is not finite")]
    InvalidCandidate(usize),
    #[error("infeasible correction problem: {0}")]
    Infeasible(String),
    #[error("covariance matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("insufficient history: {found} usable points, need {needed}")]
    InsufficientHistory { found: usize, needed: usize },
    #[error("insufficient data: {found} observations, need {needed}")]
    InsufficientData { found: usize, needed: usize },
    #[error("misaligned streams: {0}")]
    Misaligned(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("division by zero: actual value at index {index} is zero")]
    DivisionByZero { index: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
