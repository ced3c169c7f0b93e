use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("kernel matrix is not positive definite (pivot {index} = {pivot:e} after jitter {jitter:e})")]
    Factorization { index: usize, pivot: f64, jitter: f64 },

    #[error("negative predictive variance {0:e}")]
    NegativeVariance(f64),

    #[error("hallucinated input {value} in dimension {dim} is outside [-1, 1]")]
    EtaOutOfBounds { dim: usize, value: f64 },

    #[error("target lies outside the confidence band in dimension {dim} (|eta| = {ratio})")]
    OutOfBand { dim: usize, ratio: f64 },

    #[error("strategy mismatch: adapter is {actual}, operation needs {expected}")]
    StrategyMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("rollout diverged at step {step}")]
    DivergedRollout { step: usize },

    #[error("planning failed: every rollout diverged")]
    PlanningFailed,

    #[error("simulator produced a non-finite state")]
    SimulatorFault,

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
