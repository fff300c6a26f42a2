use thiserror::Error;

pub type Result<T> = std::result::Result<T, RiskError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("price {value} at position {index} must be strictly positive")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("insufficient data: {what} needs at least {needed} observations, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error(
        "insufficient tail: N*alpha = {n_alpha} must be at least 1 (N = {n}, alpha = {alpha})"
    )]
    InsufficientTail { n: usize, alpha: f64, n_alpha: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("unknown scenario {name:?}; valid names are {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("infeasible density: {0}")]
    InfeasibleDensity(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

impl RiskError {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        RiskError::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
