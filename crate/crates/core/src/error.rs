use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("repetitive sample: input {0:?} is already in the dataset")]
    RepetitiveSample(Vec<f64>),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no agent satisfies c*sigma_f^2 - psi > 0 at sigma_f^2 = {sigma_f_sq}")]
    EmptyPositiveSet { sigma_f_sq: f64 },

    #[error("sigma_f^2 search did not satisfy the fusion condition after {doublings} doublings")]
    SigmaFSearchExhausted { doublings: u32 },

    #[error("agents {agents:?} did not receive every value after {rounds} rounds")]
    Unreachable { agents: Vec<usize>, rounds: usize },

    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("weight row sums to {sum}, expected 1")]
    WeightRowNotStochastic { sum: f64 },

    #[error("consensus state degenerate: xi = {value} at position {index}")]
    DegenerateConsensus { index: usize, value: f64 },

    #[error("non-positive variance {value} at position {index}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("active set is empty")]
    EmptyActiveSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schedule violates network assumptions: {0}")]
    InvalidSchedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
