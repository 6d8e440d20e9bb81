use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("simplex point needs at least 2 coordinates, got {0}")]
    TooFewCoordinates(usize),

    #[error("coordinates sum to {sum}, not 1")]
    NotOnSimplex { sum: f64 },

    #[error("coordinate {index} is {value}, below the open-simplex floor")]
    BelowFloor { index: usize, value: f64 },

    #[error("coordinate {index} is not a finite non-negative number: {value}")]
    InvalidCoordinate { index: usize, value: f64 },

    #[error("portfolio map `{label}` returned an invalid weight vector (violation {violation:e})")]
    InvalidPortfolio { label: String, violation: f64 },

    #[error("market path needs at least {min} points, got {got}")]
    PathTooShort { min: usize, got: usize },

    #[error("horizon {horizon} exceeds the path length {available}")]
    HorizonTooLong { horizon: usize, available: usize },

    #[error("transition matrix row {row} is not a probability vector (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid generating function: {0}")]
    InvalidGenerator(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("log-optimal solver did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
