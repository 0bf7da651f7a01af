use thiserror::Error;

/// Errors raised by the estimation stack.
///
/// Recoverable estimator conditions (unconverged solver, one-class snapshot,
/// skipped corrections) are reported as flags on the returned values instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sensor field needs at least 3 sensors, got {0}")]
    TooFewSensors(usize),

    #[error("degenerate bounds")]
    DegenerateBounds,

    #[error("stochastic model requires stepping")]
    StochasticModel,

    #[error("covariance is not symmetric positive semi-definite")]
    NotPsd,

    #[error("sign undefined for zero target velocity")]
    ZeroVelocity,

    #[error("probability {0} outside (0, 1]")]
    InvalidProbability(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("both report classes are required")]
    OneClass,

    #[error("no support vectors")]
    NoSupportVectors,

    #[error("no gradient in counter field")]
    ConstantCounters,

    #[error("no local mass")]
    NoLocalMass,

    #[error("degenerate projection range")]
    DegenerateProjection,
}

pub type Result<T> = std::result::Result<T, Error>;
