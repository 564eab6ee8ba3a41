use thiserror::Error;

/// Errors raised by the library. Variants carry the witnessing indices so a
/// caller can report exactly which axiom or contract broke.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("non-finite distance at ({0}, {1})")]
    NonFiniteDistance(usize, usize),
    #[error("asymmetric distance at ({0}, {1})")]
    AsymmetricDistance(usize, usize),
    #[error("negative distance at ({0}, {1})")]
    NegativeDistance(usize, usize),
    #[error("nonzero diagonal entry at {0}")]
    NonzeroDiagonal(usize),
    #[error("triangle inequality violated for ({0}, {1}, {2})")]
    TriangleViolation(usize, usize, usize),
    #[error("empty space")]
    EmptySpace,
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("exact cover limited to {limit} points, space has {n}")]
    TooLargeForExact { n: usize, limit: usize },
    #[error("invalid segment: length {length}, resolution {resolution}")]
    InvalidSegment { length: f64, resolution: f64 },
    #[error("segment resolution {resolution} exceeds epsilon/4 for epsilon {epsilon}")]
    ResolutionTooCoarse { resolution: f64, epsilon: f64 },

    #[error("partition does not match the space: {0}")]
    PartitionMismatch(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("unknown point {0}")]
    UnknownPoint(usize),

    #[error("separator sets overlap at point {0}")]
    OverlappingSets(usize),
    #[error("separator set {0} is empty")]
    EmptySet(&'static str),
    #[error("sets A and B touch: points {0} and {1} are at distance 0")]
    ZeroGap(usize, usize),
    #[error("n_bins must be at least 2, got {0}")]
    InvalidBins(usize),
    #[error("partition incompatible with separator at level {level}: class {class} holds values {v1} and {v2}")]
    IncompatiblePartition {
        level: usize,
        class: usize,
        v1: f64,
        v2: f64,
    },

    #[error("rho must exceed 1, got {0}")]
    InvalidRho(f64),
    #[error("invalid stream: {0}")]
    InvalidStream(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("{phase} update carries a nonzero frozen-block delta at index {index}")]
    PhaseViolation { phase: &'static str, index: usize },
    #[error("divergence: loss {0} exceeds 1e6")]
    Divergence(f64),
    #[error("invalid task setup: {0}")]
    InvalidTask(String),

    #[error("recursion depth {depth} allows {reach} hops but at least {needed} are needed")]
    DepthExhausted { depth: u32, reach: f64, needed: f64 },
    #[error("no path from {start} to {goal} in the quotient graph")]
    NoPath { start: String, goal: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("experiment assertion failed: {0}")]
    ExperimentFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
