//! Neural-network kernels: feed-forward variants, attention, deformable
//! attention, layer normalization, and an explicit-gradient MLP with its
//! finite-difference oracle.
//!
//! Every operation is a pure function of its inputs; all arithmetic is f64.

mod activation;
mod attention;
mod deform;
mod ffn;
mod gradcheck;
mod layer;
mod mlp;
mod norm;
mod tensor;
pub mod toy;

pub use activation::{activation, Activation};
pub use attention::{
    multi_head_attention, scaled_dot_attention, softmax, HeadProjection, MultiHeadParams,
};
pub use deform::{bilinear_sample, ms_deform_attention, MsdaParams};
pub use ffn::{ffn_forward, swiglu, FfnParams, FfnVariant};
pub use gradcheck::{gradient_suite, GradCheckReport};
pub use layer::{
    transformer_layer_forward, LayerNormParams, LayerRole, TransformerLayerInputs,
    TransformerLayerParams,
};
pub use mlp::{
    backward_pass, evaluate_loss, finite_diff_grad, sgd_step, Gradients, LayerGrads, LossKind,
    MlpLayer, MlpNet, TrainConfig,
};
pub use norm::layer_norm;
pub use tensor::Tensor;

/// Errors produced by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("non-finite {context}: {value}")]
    NonFinite { context: &'static str, value: f64 },
    #[error("invalid shape {shape:?}: {context}")]
    InvalidShape {
        context: &'static str,
        shape: Vec<usize>,
    },
    #[error("data length mismatch: expected {expected}, got {actual}")]
    DataLength { expected: usize, actual: usize },
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter {
        name: &'static str,
        message: String,
    },
    #[error("swiglu requires the gate projection V")]
    MissingGateProjection,
    #[error("softmax row must not be empty")]
    EmptyRow,
}
