use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative probability mass {mass} at income {income}")]
    NegativeMass { income: i64, mass: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("income distribution puts no mass on negative values, so ruin is impossible")]
    NoRuinRisk,
    #[error("empty income distribution")]
    EmptyDistribution,
    #[error("action {action} is not allowed at surplus {surplus}")]
    IllegalAction { surplus: i64, action: i64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("surplus cap {x_max} is below the barrier bound {required}")]
    CapTooSmall { x_max: i64, required: i64 },
    #[error("depth {depth} leaves bracket width {width:e} above tolerance {tolerance:e}")]
    DepthTooSmall { depth: usize, width: f64, tolerance: f64 },
    #[error("policy column at depth {depth} is not a band function: {reason}")]
    NotABand { depth: usize, reason: String },
    #[error("inadmissible policy at depth {depth}, surplus {surplus}: {reason}")]
    InadmissiblePolicy { depth: usize, surplus: i64, reason: String },
    #[error("no convergence after {iterations} iterations (last gap {gap:e})")]
    MaxIterations { iterations: usize, gap: f64 },
    #[error("barrier check failed: {0}")]
    BarrierViolation(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("history tree exceeds {limit} nodes")]
    TooLarge { limit: usize },
    #[error("policy gives no valid action at depth {depth}, surplus {surplus}")]
    UndefinedAction { depth: usize, surplus: i64 },
    #[error("policy undefined at step {step}, surplus {surplus}")]
    PolicyUndefined { step: usize, surplus: i64 },
}

impl Error {
    /// True for errors that indicate a broken internal guarantee rather than bad input.
    pub fn is_invariant(&self) -> bool {
        matches!(
            self,
            Error::NotABand { .. } | Error::BarrierViolation(_) | Error::InvariantViolation(_)
        )
    }
}
