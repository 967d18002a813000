use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid forbidden word: {0}")]
    InvalidForbiddenWord(String),
    #[error("subshift is empty")]
    EmptySubshift,
    #[error("graph is not right-resolving at vertex {vertex} (label {label})")]
    NotRightResolving { vertex: usize, label: u8 },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("shift is not irreducible")]
    NotIrreducible,
    #[error("measure is not mixing")]
    NonMixingMeasure,
    #[error("Markov chain is periodic")]
    PeriodicChain,
    #[error("measure has an atom")]
    AtomicMeasure,
    #[error("word {0} is not admissible")]
    InadmissibleWord(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("iteration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("internal invariant violated: {0}")]
    InvariantViolated(String),
    #[error("subshift is not contained in the host: witness {0}")]
    NotASubshiftOfX(String),
    #[error("entropy of the subshift is not smaller than the host entropy")]
    EntropyNotSmaller,
    #[error("not a Pisot number: {0}")]
    NotPisot(String),
    #[error("polynomial is reducible: {0}")]
    Reducible(String),
    #[error("beta orbit did not cycle within {0} steps")]
    CycleNotFound(usize),
    #[error("sign could not be resolved")]
    SignUndetermined,
    #[error("matrix is not unimodular")]
    NotUnimodular,
    #[error("matrix is not hyperbolic")]
    NotHyperbolic,
    #[error("matrix is not a generalized Pisot automorphism")]
    NotGeneralizedPisot,
    #[error("containment fails: {0}")]
    ContainmentFails(String),
    #[error("no chain found between {0} and {1}")]
    NotConnected(String, String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidForbiddenWord(_) => "InvalidForbiddenWord",
            Error::EmptySubshift => "EmptySubshift",
            Error::NotRightResolving { .. } => "NotRightResolving",
            Error::Malformed(_) => "Malformed",
            Error::NotIrreducible => "NotIrreducible",
            Error::NonMixingMeasure => "NonMixingMeasure",
            Error::PeriodicChain => "PeriodicChain",
            Error::AtomicMeasure => "AtomicMeasure",
            Error::InadmissibleWord(_) => "InadmissibleWord",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::BudgetExceeded(_) => "BudgetExceeded",
            Error::InvariantViolated(_) => "InvariantViolated",
            Error::NotASubshiftOfX(_) => "NotASubshiftOfX",
            Error::EntropyNotSmaller => "EntropyNotSmaller",
            Error::NotPisot(_) => "NotPisot",
            Error::Reducible(_) => "Reducible",
            Error::CycleNotFound(_) => "CycleNotFound",
            Error::SignUndetermined => "SignUndetermined",
            Error::NotUnimodular => "NotUnimodular",
            Error::NotHyperbolic => "NotHyperbolic",
            Error::NotGeneralizedPisot => "NotGeneralizedPisot",
            Error::ContainmentFails(_) => "ContainmentFails",
            Error::NotConnected(..) => "NotConnected",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
