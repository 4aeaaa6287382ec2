use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("all step weights are zero")]
    ZeroMass,
    #[error("weight for step {step} is negative or not finite ({value})")]
    NegativeWeight { step: usize, value: f64 },
    #[error("expected {expected} weights, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weights sum to {sum}, which is not within 1e-6 of 1")]
    NotNormalized { sum: f64 },
    #[error("domain size must be at least 1")]
    EmptyDomain,
    #[error("state {state} outside [0, {n}]")]
    OutOfRange { state: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("n*ln(B) = {log_mass:.1} is too large to normalize in {scalar}")]
    Overflow { log_mass: f64, scalar: &'static str },
    #[error("n = {n} exceeds the configured cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("n = {n} is above the enumeration limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("mu(1) = 0: the expected absorption time is infinite")]
    Mu1Zero,
    #[error("all {runs} runs were censored at the step limit")]
    AllCensored { runs: u64 },
    #[error("drop constant {c} is below the computed maximum drop {max_drop}")]
    InvalidC { c: f64, max_drop: f64 },
    #[error("unknown strategy name `{0}`")]
    UnknownName(String),
    #[error("malformed distribution file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from bad input rather than a numerical limit.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Overflow { .. }
                | Error::CapExceeded { .. }
                | Error::TooLarge { .. }
                | Error::AllCensored { .. }
                | Error::InvalidC { .. }
                | Error::Mu1Zero
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
