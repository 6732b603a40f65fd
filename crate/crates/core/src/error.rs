use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("file {file} has {actual} bits, expected {expected}")]
    FileLength {
        file: usize,
        expected: usize,
        actual: usize,
    },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("cache size constraint violated: {0}")]
    MemoryViolation(String),

    #[error("randomness tape count {tapes} exceeds budget {budget}; use sampled mode")]
    BudgetExceeded { tapes: u128, budget: u128 },

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
