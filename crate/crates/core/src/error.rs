use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph is not connected")]
    NotConnected,
    #[error("bad grid dimensions: {rows}x{cols} != {n}")]
    BadDimensions { rows: usize, cols: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not doubly stochastic (max deviation {deviation:e})")]
    NotStochastic { deviation: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("weight on non-edge ({i}, {j})")]
    NotConforming { i: usize, j: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty shard")]
    EmptyShard,
    #[error("too few samples: {samples} for {agents} agents")]
    TooFewSamples { samples: usize, agents: usize },
    #[error("mixing rate must be below 1, got {0}")]
    BadAlpha(f64),
    #[error("partition has {shards} shards but the mixing matrix has {agents} agents")]
    ShardMismatch { shards: usize, agents: usize },
    #[error("non-finite state at outer iteration {outer}, inner step {inner}")]
    NonFinite { outer: usize, inner: usize },
    #[error("parse error: {0}")]
    Parse(String),
}
