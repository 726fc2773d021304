//! Edge convolution, incremental edge-collapse pooling and unpooling.

mod conv;
pub mod fixtures;
mod pool;
mod queue;
mod sparse;

pub use conv::{conv_backward, conv_forward, ConvCache, ConvGrads, ConvParams};
pub use pool::{
    pool, pool_batch_legacy, pool_with_policy, unpool, CollapseRecord, CollapseViolation, PoolHistory,
    PoolOutput, PoolPolicy, Pooler,
};
pub use queue::ScoreQueue;
pub use sparse::SparseMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpsError {
    #[error("expected {expected} input channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("expected {expected} feature rows, got {got}")]
    RowMismatch { expected: usize, got: usize },
    #[error("cannot collapse edge {edge}: {violation}")]
    IllegalCollapse { edge: usize, violation: CollapseViolation },
    #[error("pool target {target} is not below the current edge count {current}")]
    InvalidTarget { target: usize, current: usize },
    #[error("no legal collapse left at {achieved} edges (target {target})")]
    Unreachable { achieved: usize, target: usize },
    #[error("inconsistent pool history: {0}")]
    History(String),
}
