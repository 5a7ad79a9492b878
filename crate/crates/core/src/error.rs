use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty empirical measure")]
    EmptyMeasure,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot coarsen a sequence of odd length {0}")]
    OddLength(usize),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("particle blow-up at (t={t}, k={k}, i={i})")]
    ParticleBlowUp { t: u64, k: usize, i: usize },

    #[error("chain blow-up at (t={t}, k={k})")]
    ChainBlowUp { t: u64, k: usize },

    #[error("replicate {replicate} (L={level}, P={horizon}): {source}")]
    Replicate {
        replicate: u64,
        level: u32,
        horizon: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for numerical failures during simulation, as opposed to bad input.
    pub fn is_runtime(&self) -> bool {
        match self {
            Error::ParticleBlowUp { .. } | Error::ChainBlowUp { .. } => true,
            Error::Replicate { source, .. } => source.is_runtime(),
            _ => false,
        }
    }
}
