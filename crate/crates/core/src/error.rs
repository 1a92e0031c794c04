use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("locus {locus} is out of range for sequences of length {length}")]
    LocusOutOfRange { locus: usize, length: usize },

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conditioning event has zero probability")]
    ZeroProbability,

    #[error("capacity exceeded: {what} requires {needed}, limit is {limit}; {hint}")]
    Capacity {
        what: &'static str,
        needed: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("target error {0} cannot be matched by any budget in the search range")]
    Unattainable(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}
