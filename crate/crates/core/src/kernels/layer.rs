//! Encoder/decoder transformer layers composed from the attention,
//! deformable-attention and feed-forward kernels, with residual
//! connections and layer normalization after each sub-block.

use super::norm::LAYER_NORM_EPS;
use super::{
    ffn_forward, layer_norm, ms_deform_attention, multi_head_attention, FfnParams, FfnVariant,
    KernelError, MsdaParams, MultiHeadParams, Tensor,
};

/// Which sub-block sequence to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    /// Deformable attention, then the gated feed-forward.
    Encoder,
    /// Self-attention, then deformable cross-attention, then feed-forward.
    Decoder,
}

/// Gain/bias pair for one normalization stage.
#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNormParams {
    pub fn unit(width: usize) -> Self {
        Self {
            gain: vec![1.0; width],
            bias: vec![0.0; width],
        }
    }
}

/// Parameter bundle for one layer. `self_attention` and `norm_self` are
/// required for the decoder role and ignored by the encoder role.
#[derive(Debug, Clone)]
pub struct TransformerLayerParams {
    pub self_attention: Option<MultiHeadParams>,
    pub norm_self: Option<LayerNormParams>,
    pub deform: MsdaParams,
    pub norm_deform: LayerNormParams,
    pub ffn: FfnParams,
    pub norm_ffn: LayerNormParams,
    pub eps: f64,
}

impl TransformerLayerParams {
    /// Encoder-shaped bundle with unit norms.
    pub fn encoder(deform: MsdaParams, ffn: FfnParams) -> Self {
        let width = deform.d_model();
        Self {
            self_attention: None,
            norm_self: None,
            deform,
            ffn,
            norm_deform: LayerNormParams::unit(width),
            norm_ffn: LayerNormParams::unit(width),
            eps: LAYER_NORM_EPS,
        }
    }

    /// Decoder-shaped bundle with unit norms.
    pub fn decoder(self_attention: MultiHeadParams, deform: MsdaParams, ffn: FfnParams) -> Self {
        let width = deform.d_model();
        Self {
            self_attention: Some(self_attention),
            norm_self: Some(LayerNormParams::unit(width)),
            deform,
            ffn,
            norm_deform: LayerNormParams::unit(width),
            norm_ffn: LayerNormParams::unit(width),
            eps: LAYER_NORM_EPS,
        }
    }
}

/// Inputs shared by both roles: the query rows, per-level normalized
/// reference points, and the per-level feature maps attended to by the
/// deformable sub-block.
#[derive(Debug)]
pub struct TransformerLayerInputs<'a> {
    pub queries: &'a Tensor,
    pub ref_points: &'a [Vec<(f64, f64)>],
    pub value_maps: &'a [Tensor],
}

fn residual_norm(
    x: &Tensor,
    sub: &Tensor,
    norm: &LayerNormParams,
    eps: f64,
) -> Result<Tensor, KernelError> {
    layer_norm(&x.add(sub)?, &norm.gain, &norm.bias, eps)
}

/// Run one encoder or decoder layer. Output shape equals the query shape.
pub fn transformer_layer_forward(
    role: LayerRole,
    inputs: &TransformerLayerInputs<'_>,
    params: &TransformerLayerParams,
) -> Result<Tensor, KernelError> {
    let mut x = inputs.queries.clone();

    if role == LayerRole::Decoder {
        let attn = params
            .self_attention
            .as_ref()
            .ok_or(KernelError::InvalidParameter {
                name: "self_attention",
                message: "decoder layer needs self-attention parameters".into(),
            })?;
        let norm = params
            .norm_self
            .as_ref()
            .ok_or(KernelError::InvalidParameter {
                name: "norm_self",
                message: "decoder layer needs a self-attention norm".into(),
            })?;
        let attended = multi_head_attention(&x, &x, &x, attn)?;
        x = residual_norm(&x, &attended, norm, params.eps)?;
    }

    let deformed = ms_deform_attention(&x, inputs.ref_points, inputs.value_maps, &params.deform)?;
    x = residual_norm(&x, &deformed, &params.norm_deform, params.eps)?;

    let fed = ffn_forward(FfnVariant::Swiglu, &x, &params.ffn)?;
    residual_norm(&x, &fed, &params.norm_ffn, params.eps)
}
