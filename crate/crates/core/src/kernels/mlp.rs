//! A small multi-layer perceptron with hand-derived gradients and a
//! central-finite-difference oracle.
//!
//! Layers are stored in the column-vector convention: weights are
//! `n_out x n_in`, activations are `width x batch` matrices, and
//! `z = W a + b` per layer, so the backward recurrences
//!
//! ```text
//! dL/dz^(L) = dL/da^(L) ⊙ g'(z^(L))
//! dL/da^(l) = W^(l+1)T dL/dz^(l+1)            (then ⊙ g'(z^(l)))
//! dL/dW^(l) = dL/dz^(l) (a^(l-1))^T
//! dL/db^(l) = dL/dz^(l)                       (summed over the batch)
//! ```
//!
//! map directly onto matrix products. A layer may carry an optional gate
//! projection `V` sharing the bias, in which case it computes
//! `a = g(W a_prev + b) ⊙ (V a_prev + b)` and the product rule supplies
//! the extra terms; this is what the gated feed-forward variant trains
//! with. No general autodiff exists here and none is needed.

use super::{Activation, KernelError, Tensor};

/// One dense layer: `weights` is `n_out x n_in`, optionally gated.
#[derive(Debug, Clone)]
pub struct MlpLayer {
    pub weights: Tensor,
    pub gate: Option<Tensor>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl MlpLayer {
    pub fn n_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows()
    }
}

/// An ordered stack of layers with chained dimensions.
#[derive(Debug, Clone)]
pub struct MlpNet {
    layers: Vec<MlpLayer>,
}

impl MlpNet {
    pub fn new(layers: Vec<MlpLayer>) -> Result<Self, KernelError> {
        if layers.is_empty() {
            return Err(KernelError::InvalidParameter {
                name: "layers",
                message: "network needs at least one layer".into(),
            });
        }
        for pair in layers.windows(2) {
            if pair[1].n_in() != pair[0].n_out() {
                return Err(KernelError::ShapeMismatch {
                    context: "layer chaining",
                    expected: format!("{} inputs", pair[0].n_out()),
                    actual: format!("{} inputs", pair[1].n_in()),
                });
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.n_out() {
                return Err(KernelError::ShapeMismatch {
                    context: "layer bias",
                    expected: format!("{}", layer.n_out()),
                    actual: format!("layer {i}: {}", layer.bias.len()),
                });
            }
            if let Some(gate) = &layer.gate {
                if gate.shape() != layer.weights.shape() {
                    return Err(KernelError::ShapeMismatch {
                        context: "gate projection",
                        expected: format!("{:?}", layer.weights.shape()),
                        actual: format!("layer {i}: {:?}", gate.shape()),
                    });
                }
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [MlpLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().n_out()
    }

    /// Forward pass on a `n_in x batch` input, returning the output.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, KernelError> {
        Ok(self.forward_trace(input)?.activations.pop().unwrap())
    }

    fn forward_trace(&self, input: &Tensor) -> Result<ForwardTrace, KernelError> {
        if input.rank() != 2 || input.rows() != self.input_width() {
            return Err(KernelError::ShapeMismatch {
                context: "mlp input",
                expected: format!("{} x batch", self.input_width()),
                actual: format!("{:?}", input.shape()),
            });
        }
        let mut activations = vec![input.clone()];
        let mut pre_acts = Vec::new();
        let mut gate_pre_acts = Vec::new();
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let z_w = layer.weights.matmul(prev)?.add_col_bias(&layer.bias)?;
            let act = match &layer.gate {
                None => {
                    gate_pre_acts.push(None);
                    z_w.map(|t| layer.activation.apply(t))?
                }
                Some(gate) => {
                    let z_v = gate.matmul(prev)?.add_col_bias(&layer.bias)?;
                    let gated = z_w.map(|t| layer.activation.apply(t))?.hadamard(&z_v)?;
                    gate_pre_acts.push(Some(z_v));
                    gated
                }
            };
            pre_acts.push(z_w);
            activations.push(act);
        }
        Ok(ForwardTrace {
            activations,
            pre_acts,
            gate_pre_acts,
        })
    }
}

struct ForwardTrace {
    /// `a^(0) .. a^(L)`; `a^(0)` is the input.
    activations: Vec<Tensor>,
    /// `z^(1) .. z^(L)` (the W-branch for gated layers).
    pre_acts: Vec<Tensor>,
    /// `V`-branch pre-activations for gated layers, per layer.
    gate_pre_acts: Vec<Option<Tensor>>,
}

impl Tensor {
    /// Add a height-matching vector to every column (column convention).
    fn add_col_bias(&self, bias: &[f64]) -> Result<Tensor, KernelError> {
        if self.rank() != 2 || bias.len() != self.rows() {
            return Err(KernelError::ShapeMismatch {
                context: "column bias",
                expected: format!("{} entries", self.shape()[0]),
                actual: format!("{}", bias.len()),
            });
        }
        let w = self.cols();
        let mut out = self.clone();
        for r in 0..self.rows() {
            for c in 0..w {
                out.set2(r, c, self.at2(r, c) + bias[r]);
            }
        }
        Ok(out)
    }

    fn row_sums(&self) -> Vec<f64> {
        (0..self.rows()).map(|r| self.row(r).iter().sum()).collect()
    }
}

/// Loss functions for training and gradient checking.
///
/// * `MeanSquaredError`: mean over the batch of the squared error summed
///   over output coordinates, so a single linear layer reduces to the
///   textbook least-squares gradient `2 (ŷ - y) x^T / n`.
/// * `CrossEntropy`: softmax over the network output followed by the mean
///   negative log-likelihood of the target one-hot columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    MeanSquaredError,
    CrossEntropy,
}

impl LossKind {
    /// Scalar loss for `output` vs `target`, both `width x batch`.
    pub fn evaluate(&self, output: &Tensor, target: &Tensor) -> Result<f64, KernelError> {
        if output.shape() != target.shape() {
            return Err(KernelError::ShapeMismatch {
                context: "loss target",
                expected: format!("{:?}", output.shape()),
                actual: format!("{:?}", target.shape()),
            });
        }
        let batch = output.cols() as f64;
        match self {
            LossKind::MeanSquaredError => {
                let diff = output.sub(target)?;
                Ok(diff.as_slice().iter().map(|d| d * d).sum::<f64>() / batch)
            }
            LossKind::CrossEntropy => {
                let mut total = 0.0;
                for c in 0..output.cols() {
                    let col: Vec<f64> = (0..output.rows()).map(|r| output.at2(r, c)).collect();
                    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let log_sum = col.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
                    for r in 0..output.rows() {
                        total -= target.at2(r, c) * (output.at2(r, c) - log_sum);
                    }
                }
                Ok(total / batch)
            }
        }
    }

    /// `dL/da^(L)`, same shape as the output.
    fn output_gradient(&self, output: &Tensor, target: &Tensor) -> Result<Tensor, KernelError> {
        let batch = output.cols() as f64;
        match self {
            LossKind::MeanSquaredError => output.sub(target)?.scale(2.0 / batch),
            LossKind::CrossEntropy => {
                let mut grad = Tensor::zeros([output.rows(), output.cols()]);
                for c in 0..output.cols() {
                    let col: Vec<f64> = (0..output.rows()).map(|r| output.at2(r, c)).collect();
                    let probs = super::attention::softmax_slice(&col);
                    for r in 0..output.rows() {
                        grad.set2(r, c, (probs[r] - target.at2(r, c)) / batch);
                    }
                }
                Ok(grad)
            }
        }
    }
}

/// Per-layer gradients; shapes mirror the layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Tensor,
    pub gate: Option<Tensor>,
    pub bias: Vec<f64>,
}

/// One `LayerGrads` per layer, outermost first.
pub type Gradients = Vec<LayerGrads>;

/// Training hyper-parameters for the toy classifier and SGD stepping.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.learning_rate > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "learning_rate",
                message: format!("must be positive, got {}", self.learning_rate),
            });
        }
        if self.epochs == 0 {
            return Err(KernelError::InvalidParameter {
                name: "epochs",
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            seed: 0,
            loss: LossKind::MeanSquaredError,
        }
    }
}

/// Loss of the network on `(input, target)`.
pub fn evaluate_loss(
    net: &MlpNet,
    input: &Tensor,
    target: &Tensor,
    loss: LossKind,
) -> Result<f64, KernelError> {
    loss.evaluate(&net.forward(input)?, target)
}

/// Analytic gradients of the loss with respect to every parameter.
pub fn backward_pass(
    net: &MlpNet,
    input: &Tensor,
    target: &Tensor,
    loss: LossKind,
) -> Result<Gradients, KernelError> {
    let trace = net.forward_trace(input)?;
    let output = trace.activations.last().unwrap();
    let mut d_act = loss.output_gradient(output, target)?;

    let mut grads: Vec<LayerGrads> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate().rev() {
        let z_w = &trace.pre_acts[l];
        let prev_act = &trace.activations[l];
        let g_prime = z_w.map(|t| layer.activation.derivative(t))?;

        let (d_zw, d_zv) = match &trace.gate_pre_acts[l] {
            None => (d_act.hadamard(&g_prime)?, None),
            Some(z_v) => {
                let g_of_zw = z_w.map(|t| layer.activation.apply(t))?;
                let d_zw = d_act.hadamard(z_v)?.hadamard(&g_prime)?;
                let d_zv = d_act.hadamard(&g_of_zw)?;
                (d_zw, Some(d_zv))
            }
        };

        let weights = d_zw.matmul(&prev_act.transpose())?;
        let (gate, bias, d_prev) = match (&layer.gate, &d_zv) {
            (Some(gate_w), Some(d_zv)) => {
                let gate_grad = d_zv.matmul(&prev_act.transpose())?;
                // Shared bias feeds both branches, so the contributions add.
                let bias = d_zw.add(d_zv)?.row_sums();
                let d_prev = layer
                    .weights
                    .transpose()
                    .matmul(&d_zw)?
                    .add(&gate_w.transpose().matmul(d_zv)?)?;
                (Some(gate_grad), bias, d_prev)
            }
            _ => {
                let bias = d_zw.row_sums();
                let d_prev = layer.weights.transpose().matmul(&d_zw)?;
                (None, bias, d_prev)
            }
        };

        grads.push(LayerGrads {
            weights,
            gate,
            bias,
        });
        d_act = d_prev;
    }
    grads.reverse();
    Ok(grads)
}

/// Gradient-descent step: every parameter decremented by
/// `learning_rate * gradient`. Nothing else is touched.
pub fn sgd_step(net: &MlpNet, grads: &Gradients, cfg: &TrainConfig) -> Result<MlpNet, KernelError> {
    cfg.validate()?;
    if grads.len() != net.layers.len() {
        return Err(KernelError::ShapeMismatch {
            context: "gradient set",
            expected: format!("{} layers", net.layers.len()),
            actual: format!("{} layers", grads.len()),
        });
    }
    let alpha = cfg.learning_rate;
    let mut layers = Vec::with_capacity(net.layers.len());
    for (layer, grad) in net.layers.iter().zip(grads) {
        if grad.weights.shape() != layer.weights.shape()
            || grad.bias.len() != layer.bias.len()
            || grad.gate.is_some() != layer.gate.is_some()
        {
            return Err(KernelError::ShapeMismatch {
                context: "sgd step",
                expected: format!("{:?}", layer.weights.shape()),
                actual: format!("{:?}", grad.weights.shape()),
            });
        }
        layers.push(MlpLayer {
            weights: layer.weights.sub(&grad.weights.scale(alpha)?)?,
            gate: match (&layer.gate, &grad.gate) {
                (Some(g), Some(dg)) => Some(g.sub(&dg.scale(alpha)?)?),
                _ => None,
            },
            bias: layer
                .bias
                .iter()
                .zip(&grad.bias)
                .map(|(b, db)| b - alpha * db)
                .collect(),
            activation: layer.activation,
        });
    }
    MlpNet::new(layers)
}

/// Central finite differences `(L(θ+h) - L(θ-h)) / 2h` per scalar
/// parameter; the verification oracle for [`backward_pass`].
pub fn finite_diff_grad(
    net: &MlpNet,
    input: &Tensor,
    target: &Tensor,
    loss: LossKind,
    step: f64,
) -> Result<Gradients, KernelError> {
    if !(step > 0.0) {
        return Err(KernelError::InvalidParameter {
            name: "step",
            message: format!("must be positive, got {step}"),
        });
    }
    let mut probe = net.clone();
    let mut grads = Vec::with_capacity(net.layers.len());
    for l in 0..net.layers.len() {
        let weight_shape = net.layers[l].weights.shape().to_vec();
        let n_weights = net.layers[l].weights.len();

        let mut weight_grad = vec![0.0; n_weights];
        for i in 0..n_weights {
            weight_grad[i] = central_diff(&mut probe, input, target, loss, step, |net, delta| {
                let w = &mut net.layers_mut()[l].weights;
                w.as_mut_slice()[i] += delta;
            })?;
        }

        let gate_grad = match &net.layers[l].gate {
            None => None,
            Some(gate) => {
                let mut g = vec![0.0; gate.len()];
                for i in 0..gate.len() {
                    g[i] = central_diff(&mut probe, input, target, loss, step, |net, delta| {
                        let gate = net.layers_mut()[l].gate.as_mut().unwrap();
                        gate.as_mut_slice()[i] += delta;
                    })?;
                }
                Some(Tensor::new(gate.shape().to_vec(), g)?)
            }
        };

        let mut bias_grad = vec![0.0; net.layers[l].bias.len()];
        for i in 0..bias_grad.len() {
            bias_grad[i] = central_diff(&mut probe, input, target, loss, step, |net, delta| {
                net.layers_mut()[l].bias[i] += delta;
            })?;
        }

        grads.push(LayerGrads {
            weights: Tensor::new(weight_shape, weight_grad)?,
            gate: gate_grad,
            bias: bias_grad,
        });
    }
    Ok(grads)
}

fn central_diff(
    probe: &mut MlpNet,
    input: &Tensor,
    target: &Tensor,
    loss: LossKind,
    step: f64,
    bump: impl Fn(&mut MlpNet, f64),
) -> Result<f64, KernelError> {
    bump(probe, step);
    let plus = evaluate_loss(probe, input, target, loss)?;
    bump(probe, -2.0 * step);
    let minus = evaluate_loss(probe, input, target, loss)?;
    bump(probe, step);
    Ok((plus - minus) / (2.0 * step))
}
