use thiserror::Error;

/// Errors raised by model construction, heuristic evaluation and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value or structure violates its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    /// Both state-conditional distributions assign zero mass to the signal.
    #[error("signal `{0}` has zero probability in both states")]
    DegenerateSignal(String),

    /// The 0/0 case of the posterior formula: a certain private belief
    /// meets the opposite certain prior.
    #[error("posterior undefined for private belief {p} and prior {prior}")]
    UndefinedPosterior { p: f64, prior: f64 },

    #[error("empty history: prior needs at least one observed action")]
    EmptyHistory,

    /// One of the events {p(s) >= 1/2}, {p(s) < 1/2} is null, so the
    /// quasi-Bayesian parameters are undefined.
    #[error("quasi-Bayesian threshold event `{0}` has zero probability")]
    DegenerateThreshold(&'static str),

    #[error("prior table has no entry for (m={m}, k={k})")]
    MissingEntry { m: u64, k: u64 },

    /// The prior depends on the counts and not on their proportion alone.
    #[error("prior rule is not size invariant; it has no proportion-only urn function")]
    NotSizeInvariant,

    #[error("coupling violated at step {step}: hi proportion {x_hi} < lo proportion {x_lo}")]
    CouplingViolated { step: u64, x_hi: f64, x_lo: f64 },

    /// A model in a heterogeneous sequence falls below the declared variance bound.
    #[error("model {index} has private-belief variance {variance} below the bound {bound}")]
    Informativeness { index: usize, variance: f64, bound: f64 },

    #[error("exhaustive enumeration refused: {steps} steps exceeds the limit of {limit}")]
    EnumerationTooLarge { steps: u32, limit: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
