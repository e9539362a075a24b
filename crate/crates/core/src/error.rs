use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no satellite above the {min_elevation_deg:.2} deg elevation mask")]
    NoVisibleSatellite { min_elevation_deg: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("environment history shorter than the observation delay ({needed} steps)")]
    NotInitialized { needed: usize },

    #[error("empty minibatch")]
    EmptyBatch,

    #[error("channel matrix is rank deficient (sigma_min/sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("channel column {0} is zero")]
    ZeroColumn(usize),

    #[error("precoder power {power} exceeds budget {budget}")]
    PowerExceeded { power: f64, budget: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
