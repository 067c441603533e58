//! Randomized comparison of analytic gradients against central finite
//! differences, used by the `gradcheck` CLI subcommand and the acceptance
//! suite.

use super::{
    backward_pass, finite_diff_grad, Activation, Gradients, KernelError, LossKind, MlpLayer,
    MlpNet, Tensor,
};
use crate::rng::SplitMix64;

const FD_STEP: f64 = 1e-5;
/// Coordinates with a finite-difference magnitude at or below this floor
/// carry no reliable signal and are skipped.
const FD_FLOOR: f64 = 1e-8;

/// Outcome of one randomized configuration.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub layer_widths: Vec<usize>,
    pub loss: LossKind,
    pub gated: bool,
    pub max_rel_error: f64,
    pub coordinates_checked: usize,
}

/// Aggregate outcome of the suite.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub cases: Vec<GradCheckCase>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::new(
        [rows, cols],
        (0..rows * cols)
            .map(|_| scale * rng.next_symmetric())
            .collect(),
    )
    .expect("finite random draws")
}

fn random_net(rng: &mut SplitMix64) -> MlpNet {
    let n_in = 1 + rng.next_index(4);
    let hidden = 1 + rng.next_index(5);
    let n_out = 1 + rng.next_index(3);
    // Smooth activations keep finite differences valid everywhere; ReLU is
    // exercised too, with pre-activations nudged away from the kink below.
    let hidden_act = match rng.next_index(5) {
        0 => Activation::Relu,
        1 => Activation::Sigmoid,
        2 => Activation::Gelu,
        3 => Activation::Swish(1.0),
        _ => Activation::Swish(2.0),
    };
    let gated = rng.next_index(3) == 0;
    let out_act = if rng.next_index(2) == 0 {
        Activation::Identity
    } else {
        Activation::Sigmoid
    };
    MlpNet::new(vec![
        MlpLayer {
            weights: random_matrix(rng, hidden, n_in, 0.8),
            gate: gated.then(|| random_matrix(rng, hidden, n_in, 0.8)),
            bias: (0..hidden).map(|_| 0.5 * rng.next_symmetric()).collect(),
            activation: hidden_act,
        },
        MlpLayer {
            weights: random_matrix(rng, n_out, hidden, 0.8),
            gate: None,
            bias: (0..n_out).map(|_| 0.5 * rng.next_symmetric()).collect(),
            activation: out_act,
        },
    ])
    .expect("dimensions chain by construction")
}

fn relu_preactivations_near_kink(net: &MlpNet, input: &Tensor) -> bool {
    // A ReLU pre-activation within a few finite-difference steps of zero
    // makes the central difference straddle the kink; such draws are
    // rejected and resampled.
    let layer = &net.layers()[0];
    if layer.activation != Activation::Relu {
        return false;
    }
    let z = layer.weights.matmul(input).expect("forward shapes verified");
    for r in 0..z.rows() {
        for c in 0..z.cols() {
            if (z.at2(r, c) + layer.bias[r]).abs() < 1e-3 {
                return true;
            }
        }
    }
    false
}

/// Compare [`backward_pass`] and [`finite_diff_grad`] on `cases` random
/// two-layer configurations. The relative error of a coordinate is
/// `|analytic - fd| / max(|analytic|, |fd|)`, evaluated wherever that
/// denominator exceeds the noise floor; the check is therefore symmetric
/// in both directions.
pub fn gradient_suite(cases: usize, seed: u64, tolerance: f64) -> Result<GradCheckReport, KernelError> {
    let mut rng = SplitMix64::new(seed);
    let mut report = GradCheckReport {
        cases: Vec::with_capacity(cases),
        max_rel_error: 0.0,
        tolerance,
    };
    for _ in 0..cases {
        // Redraw configurations whose finite differences carry no signal
        // (e.g. a fully dead ReLU layer) or straddle a ReLU kink.
        let (net, loss, max_rel, checked) = loop {
            let net = random_net(&mut rng);
            let batch = 1 + rng.next_index(3);
            let input = random_matrix(&mut rng, net.input_width(), batch, 1.0);
            let loss = if rng.next_index(2) == 0 {
                LossKind::MeanSquaredError
            } else {
                LossKind::CrossEntropy
            };
            let target = match loss {
                LossKind::MeanSquaredError => {
                    random_matrix(&mut rng, net.output_width(), batch, 1.0)
                }
                LossKind::CrossEntropy => {
                    let mut t = Tensor::zeros([net.output_width(), batch]);
                    for c in 0..batch {
                        let hot = rng.next_index(net.output_width());
                        t.set2(hot, c, 1.0);
                    }
                    t
                }
            };
            if relu_preactivations_near_kink(&net, &input) {
                continue;
            }
            let analytic = backward_pass(&net, &input, &target, loss)?;
            let numeric = finite_diff_grad(&net, &input, &target, loss, FD_STEP)?;
            let (max_rel, checked) = compare(&analytic, &numeric);
            if checked > 0 {
                break (net, loss, max_rel, checked);
            }
        };

        report.max_rel_error = report.max_rel_error.max(max_rel);
        report.cases.push(GradCheckCase {
            layer_widths: net.layers().iter().map(|l| l.n_out()).collect(),
            loss,
            gated: net.layers()[0].gate.is_some(),
            max_rel_error: max_rel,
            coordinates_checked: checked,
        });
    }
    Ok(report)
}

fn compare(analytic: &Gradients, numeric: &Gradients) -> (f64, usize) {
    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    let mut visit = |a: f64, n: f64| {
        let denom = a.abs().max(n.abs());
        if denom > FD_FLOOR {
            max_rel = max_rel.max((a - n).abs() / denom);
            checked += 1;
        }
    };
    for (ag, ng) in analytic.iter().zip(numeric) {
        for (a, n) in ag.weights.as_slice().iter().zip(ng.weights.as_slice()) {
            visit(*a, *n);
        }
        if let (Some(agate), Some(ngate)) = (&ag.gate, &ng.gate) {
            for (a, n) in agate.as_slice().iter().zip(ngate.as_slice()) {
                visit(*a, *n);
            }
        }
        for (a, n) in ag.bias.iter().zip(&ng.bias) {
            visit(*a, *n);
        }
    }
    (max_rel, checked)
}
