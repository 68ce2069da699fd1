use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{pairs} pairs exceed the dense capacity of {max} pairs")]
    DenseCapacity { pairs: usize, max: usize },

    #[error("length mismatch: expected {expected} pairs, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: u64, weight: f64 },

    #[error("distribution has total mass {0}, expected at most 1")]
    ExcessMass(f64),

    #[error("distribution is empty")]
    EmptyDistribution,

    #[error("round string must contain at least one non-zero symbol")]
    ZeroRoundString,

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("unknown code `{0}`")]
    UnknownCode(String),

    #[error("sparse distributions are not supported here; use a dense distribution (n <= {0})")]
    SparseUnsupported(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
