use thiserror::Error;

/// Errors raised by the laboratory. The CLI maps each variant to an exit code
/// through [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("word lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("near-resonance at k = {k:?}: |exp(2 pi i <k, omega>) - 1| = {modulus:e} is below the floor {floor:e}")]
    NearResonance { k: [i64; 2], modulus: f64, floor: f64 },

    #[error("no feasible eta for q = {q}: scanned 1/eta in [{lo}, {hi}] for multiples of {step}")]
    NoFeasibleEta { q: u64, lo: f64, hi: f64, step: u64 },

    #[error("numeric failure: achieved tolerance {achieved:e}, required {required:e}")]
    NumericFailure { achieved: f64, required: f64 },

    #[error("roof is not strictly positive: value {value} at (x, y) = ({x}, {y})")]
    InvalidRoof { x: f64, y: f64, value: f64 },

    #[error("return count exceeded the cap of {cap} base steps")]
    CapExceeded { cap: u64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

impl Error {
    /// 2 for precondition-type failures, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NearResonance { .. } | Error::NumericFailure { .. } | Error::CapExceeded { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
