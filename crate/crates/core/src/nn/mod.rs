//! Reverse-mode differentiation and the mesh network built on it.

mod checkpoint;
mod model;
mod optim;
mod tape;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, MAGIC as CHECKPOINT_MAGIC};
pub use model::{ForwardPass, LayerSpec, ModelGraph};
pub use optim::{Optimizer, OptimizerKind};
pub use tape::{Tape, Var, NORM_EPS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("backward already ran for this forward pass")]
    StaleCache,
    #[error("no loss has been set on this forward pass")]
    NoLoss,
    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests;
