use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid split parameters: {0}")]
    InvalidParams(String),

    #[error("invalid split vector: {0}")]
    InvalidDraw(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid model arguments: {0}")]
    InvalidModelArgs(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("non-terminating redistribution: more than {rounds} rounds in one overflow")]
    NonTerminating { rounds: u64 },

    #[error("model `{0}` admits no evaluation path for its constants")]
    NoEvaluationPath(String),

    #[error("model invariant failure: {0}")]
    ModelInvariant(String),

    #[error("size mismatch: {left} vs {right} samples")]
    SizeMismatch { left: usize, right: usize },

    #[error(
        "no convergence after {iterations} iterations (last step {last_step:.3e}, {})",
        if *.diverging { "steps growing" } else { "slow mixing" }
    )]
    NonConvergence { iterations: usize, last_step: f64, diverging: bool },

    #[error("budget exceeded: {what} would exceed {limit}")]
    Budget { what: &'static str, limit: u64 },

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
