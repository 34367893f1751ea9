use thiserror::Error;

/// Errors raised by the measurement simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("entry count {found} does not match {rows}x{cols}")]
    BadShape {
        rows: usize,
        cols: usize,
        found: usize,
    },

    #[error("dimensions must be positive")]
    EmptyDimension,

    #[error("factor index {index} out of range for a space with {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },

    #[error("factor {0} targeted twice")]
    DuplicateFactor(usize),

    #[error("operator is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("observable spectrum value {value} is not an integer in 0..{modulus}")]
    NonIntegerSpectrum { value: f64, modulus: usize },

    #[error("zero-probability branch (probability {probability:e})")]
    ZeroProbability { probability: f64 },

    #[error("unknown outcome label {0}")]
    UnknownLabel(usize),

    #[error("outcome weights must be strictly positive and one per label")]
    InvalidWeights,

    #[error("operation requires complete observation (one operator per outcome)")]
    IncompleteObservation,

    #[error("reduction family is not complete (residual {residual:e})")]
    IncompleteFamily { residual: f64 },

    #[error("reversal leaks into vacuum (residual {residual:e})")]
    VacuumLeak { residual: f64 },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },

    #[error(
        "horizon exceeded — truncated string no longer faithful (t = {t}, horizon = {horizon})"
    )]
    HorizonExceeded { t: usize, horizon: usize },

    #[error("site {0} is outside the simulated string")]
    SiteOutOfRange(String),

    #[error("enumeration of {count} sequences exceeds the cap {cap}")]
    EnumerationCapExceeded { count: usize, cap: usize },

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
