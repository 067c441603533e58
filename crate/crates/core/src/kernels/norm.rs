//! Layer normalization over the last dimension.

use super::{KernelError, Tensor};

/// Default epsilon used by the transformer layers.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row standardization followed by an affine map:
/// `gain * (x - mean) / sqrt(var + eps) + bias`, with the population
/// variance taken over the last dimension.
pub fn layer_norm(
    x: &Tensor,
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> Result<Tensor, KernelError> {
    if x.rank() != 2 {
        return Err(KernelError::ShapeMismatch {
            context: "layer_norm",
            expected: "rank-2 tensor".into(),
            actual: format!("{:?}", x.shape()),
        });
    }
    let width = x.cols();
    if gain.len() != width || bias.len() != width {
        return Err(KernelError::ShapeMismatch {
            context: "layer_norm gain/bias",
            expected: format!("width {width}"),
            actual: format!("gain {}, bias {}", gain.len(), bias.len()),
        });
    }
    let mut out = Tensor::zeros([x.rows(), width]);
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / width as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for c in 0..width {
            out.set2(r, c, gain[c] * (row[c] - mean) * inv + bias[c]);
        }
    }
    Ok(out)
}
