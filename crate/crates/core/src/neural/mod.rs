//! The 8-32-16-8-2 tanh fusion network, its training loop, and the triplet
//! and sigmoid cross-entropy losses used by the upstream feature extractors.

pub mod gradcheck;
mod loss;
mod mlp;
mod train;

use thiserror::Error;

pub use loss::{
    apply_mask, dsc_batch_loss, dsc_gradient, dsc_loss, etl_gradient, etl_loss, sigmoid, softmax_xent, softplus,
    DistanceTransform, EtlGradient,
};
pub use mlp::{
    forward_trace, mlp_forward, mlp_gradient, mlp_logits, softmax2, ForwardTrace, Layer, MlpParams, LAYER_SHAPES, PARAM_COUNT,
};
pub use train::{accuracy, train_mlp, OptimizerKind, TrainConfig, TrainError, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("network output is not finite")]
    NonFiniteOutput,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("expected {expected} parameters, got {actual}")]
    ParamCount { expected: usize, actual: usize },
    #[error("parameter {index} is not finite")]
    NonFiniteParam { index: usize },
    #[error("layer {layer}: {detail}")]
    LayerShape { layer: usize, detail: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("margin {0} must be finite and non-negative")]
    InvalidMargin(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("target {0} is not 0 or 1")]
    InvalidTarget(u8),
}
