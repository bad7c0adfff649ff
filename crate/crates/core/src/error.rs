use thiserror::Error;

/// Errors produced by the channel model, simulator, estimators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside its valid domain [{lo}, {hi}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("wall reflection of ({y}, {z}) did not settle within {passes} passes")]
    ReflectionDiverged { y: f64, z: f64, passes: u32 },

    #[error("signal has no molecules (all counts are zero)")]
    NoSignal,

    #[error("signal is degenerate: {0}")]
    DegenerateSignal(String),

    #[error("R² is undefined: {0}")]
    UndefinedRSquared(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
