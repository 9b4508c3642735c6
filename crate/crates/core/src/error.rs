use thiserror::Error;

/// Errors raised while parsing PGM data.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("PGM maxval {0} exceeds 255")]
    MaxvalTooLarge(u32),
    #[error("truncated PGM data: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PGM sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u32 },
}

/// Errors raised while parsing the text path formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PathFormatError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("empty domain")]
    EmptyDomain,
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inpainting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index {index} out of range 0..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("invalid merge step {step}: {reason}")]
    InvalidStep { step: usize, reason: String },
    #[error("grey value {0} is not an initial value of the quantisation path")]
    ValueNotInPath(u8),
    #[error("grey depth {0} is not a power of two")]
    NotPowerOfTwo(u32),
    #[error("budget {budget} bits is infeasible; minimal achievable cost is {min_cost} bits")]
    InfeasibleBudget { budget: f64, min_cost: f64 },
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    PathFormat(#[from] PathFormatError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
