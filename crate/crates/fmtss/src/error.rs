use thiserror::Error;

/// Errors produced by the modem and estimator operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sample-rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: f64, right: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("input signal is empty or all-zero")]
    ZeroSignal,

    #[error("preamble not detected: peak {peak:.3e} below {threshold:.3e}")]
    NotDetected { peak: f64, threshold: f64 },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("recovery bound violated: support {support} exceeds half of {budget} retained samples")]
    RecoveryBound { support: usize, budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
