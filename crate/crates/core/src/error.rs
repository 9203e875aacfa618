use thiserror::Error;

use crate::game::StrategyProfile;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The fixed-point iteration ran out of iterations; carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: StrategyProfile,
    },

    #[error("tie between actions {actions:?} on a dice face")]
    TieEncountered { actions: Vec<usize> },

    #[error("epsilon {epsilon} too large for the ball condition (max feasible {max_feasible})")]
    EpsilonTooLarge { epsilon: f64, max_feasible: f64 },

    /// A numerical check contradicted the claim it was certifying.
    #[error("claim falsified: {0}")]
    ClaimFalsified(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
