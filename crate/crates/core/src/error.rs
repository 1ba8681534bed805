//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid character '{character}' at position {position} (expected A/C/G/T)")]
    InvalidNucleotide { position: usize, character: char },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("inconsistent sequence lengths: expected {expected}, found {found} in \"{sequence}\"")]
    InconsistentLength {
        expected: usize,
        found: usize,
        sequence: String,
    },

    #[error("nonpositive value {value} for sequence \"{sequence}\" under log2 transform")]
    NonpositiveValue { sequence: String, value: f64 },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("entry at index {index} is not binary: {value}")]
    NonBinaryEntry { index: usize, value: f64 },

    #[error("all-zero Ising instance cannot be scaled")]
    AllZeroInstance,

    #[error("brute force refused: dim {dim} exceeds limit {limit}")]
    BruteForceTooLarge { dim: usize, limit: usize },

    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),

    #[error("empty solution pool")]
    EmptyPool,

    #[error("singular system: ridge solve failed at lambda = {lambda}")]
    SingularSystem { lambda: f64 },

    #[error(
        "lasso did not converge after {sweeps} sweeps (max coordinate change {delta:.3e}, KKT residual {kkt:.3e})"
    )]
    LassoNoConvergence {
        sweeps: usize,
        delta: f64,
        kkt: f64,
        last_iterate: Vec<f64>,
    },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("kendall tau undefined: {0}")]
    UndefinedTau(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("train/test overlap: {count} sequence(s) appear in both partitions")]
    TrainTestOverlap { count: usize },

    #[error("training instance {index} failed: {source}")]
    InstanceFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("external method failed: {0}")]
    External(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}
