use thiserror::Error;

pub type Result<T> = std::result::Result<T, RoseError>;

#[derive(Debug, Error)]
pub enum RoseError {
    #[error("Bloch state became non-finite at t = {time:e} s")]
    NonFiniteState { time: f64 },

    #[error("ensemble has no detuning classes")]
    EmptyEnsemble,

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("insufficient data: got {got} points, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> RoseError {
    RoseError::InvalidParameter(msg.into())
}
