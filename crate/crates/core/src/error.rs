//! Error type shared across the toolkit.

/// Failure modes of the optimization and estimation routines.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No feasible sample carries positive weight.
    #[error("empty support: no feasible samples with positive weight")]
    EmptySupport,

    /// A self-normalized score has zero denominator on its evaluation set.
    /// Comparators rank such scores as worst possible.
    #[error("undefined score: no usable mass on the evaluation set")]
    UndefinedScore,

    #[error("sampler exhausted after {max_rejects} rejected proposals")]
    SamplerExhausted { max_rejects: usize },

    /// A masked density has no observable feasible mass.
    #[error("empty feasible mass: normalizer estimate is zero")]
    EmptyFeasibleMass,

    #[error("degenerate design: least-squares system is rank-deficient")]
    DegenerateDesign,

    #[error("covariance factorization failed")]
    FactorizationFailed,

    /// An internal numerical invariant was violated; should be unreachable.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
