use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("budget exceeded: {what} needs {count} items, cap is {cap}")]
    BudgetExceeded { what: String, count: u128, cap: u128 },
    #[error("region too thin: {0}")]
    RegionTooThin(String),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("linear program infeasible: {certificate}")]
    Infeasible { certificate: String },
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, TdsError>;

pub(crate) fn degenerate(msg: impl Into<String>) -> TdsError {
    TdsError::DegenerateInput(msg.into())
}
