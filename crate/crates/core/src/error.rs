use thiserror::Error;

/// Errors produced by estimation, simulation, evaluation and I/O.
#[derive(Debug, Error)]
pub enum BlinError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("time index {t} out of range; earliest legal index is {earliest}")]
    IndexOutOfRange { t: usize, earliest: usize },

    #[error("insufficient data: horizon {horizon} must exceed {required}")]
    InsufficientData { horizon: usize, required: usize },

    #[error("dense design of {elements} elements exceeds the budget of {budget}")]
    BudgetExceeded { elements: usize, budget: usize },

    #[error("coefficient operator is not stationary (spectral radius {radius:.6})")]
    NonStationary { radius: f64 },

    #[error("target R² {target} unreachable; maximum achievable is {max_achievable:.6}")]
    CalibrationUnreachable { target: f64, max_achievable: f64 },

    #[error("R² is undefined for an all-zero response")]
    ZeroDenominator,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("duplicate record for key {0}")]
    DuplicateKey(String),

    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BlinError {
    /// Short machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            BlinError::Shape(_) => "shape",
            BlinError::IndexOutOfRange { .. } => "index",
            BlinError::InsufficientData { .. } => "insufficient_data",
            BlinError::BudgetExceeded { .. } => "budget",
            BlinError::NonStationary { .. } => "non_stationary",
            BlinError::CalibrationUnreachable { .. } => "calibration",
            BlinError::ZeroDenominator => "zero_denominator",
            BlinError::InvalidConfig(_) => "config",
            BlinError::Degenerate(_) => "degenerate",
            BlinError::DuplicateKey(_) => "duplicate_key",
            BlinError::Parse { .. } => "parse",
            BlinError::Io(_) => "io",
            BlinError::Csv(_) => "csv",
            BlinError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, BlinError>;
