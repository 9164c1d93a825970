use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("eigenvalue iteration did not converge for index {index} after {sweeps} sweeps")]
    NoConvergence { index: usize, sweeps: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size guard exceeded: {what} (limit {limit})")]
    SizeGuard { what: String, limit: u64 },

    #[error("moment of order {order} requested, table holds up to {max}")]
    MomentOrder { order: u32, max: u32 },

    #[error("empty input")]
    EmptyInput,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
