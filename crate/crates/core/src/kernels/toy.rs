//! Toy 2-d classification demo comparing the plain ReLU network against
//! the gated swish network, including dataset generators, a training
//! driver, and decision-grid rendering.

use super::{
    backward_pass, evaluate_loss, sgd_step, Activation, KernelError, MlpLayer, MlpNet, Tensor,
    TrainConfig,
};
use crate::rng::SplitMix64;
use crate::svg::{DataViewport, SvgDoc};
use std::fmt::Write as _;

/// Hidden width of the toy networks.
pub const TOY_HIDDEN_WIDTH: usize = 16;
/// Decision-grid resolution (cells per axis).
pub const GRID_RESOLUTION: usize = 60;

/// A labeled 2-d sample; `label` is the class bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub label: bool,
}

/// Which hidden block the classifier trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyVariant {
    Relu,
    Swiglu,
}

/// Two interleaved half-circles with Gaussian jitter.
///
/// Class 0 follows `(r cos t, r sin t)`, class 1 follows
/// `(r (1 - cos t), r (1/2 - sin t))` with `t` uniform in `[0, pi]`; per
/// point the draws are `t`, then the x jitter, then the y jitter.
pub fn two_moons(n_per_class: usize, radius: f64, noise: f64, seed: u64) -> Vec<LabeledPoint> {
    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(2 * n_per_class);
    for label in [false, true] {
        for _ in 0..n_per_class {
            let t = std::f64::consts::PI * rng.next_f64();
            let (mut x, mut y) = if label {
                (radius * (1.0 - t.cos()), radius * (0.5 - t.sin()))
            } else {
                (radius * t.cos(), radius * t.sin())
            };
            x += noise * rng.next_gauss();
            y += noise * rng.next_gauss();
            points.push(LabeledPoint { x, y, label });
        }
    }
    points
}

/// Two linearly separable Gaussian blobs centered at `(-separation, 0)`
/// and `(separation, 0)`.
pub fn two_blobs(n_per_class: usize, separation: f64, sigma: f64, seed: u64) -> Vec<LabeledPoint> {
    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(2 * n_per_class);
    for label in [false, true] {
        let cx = if label { separation } else { -separation };
        for _ in 0..n_per_class {
            points.push(LabeledPoint {
                x: cx + sigma * rng.next_gauss(),
                y: sigma * rng.next_gauss(),
                label,
            });
        }
    }
    points
}

/// Rasterized classifier response over the data's bounding box.
#[derive(Debug, Clone)]
pub struct DecisionGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: usize,
    /// Row-major `resolution x resolution` predicted probabilities,
    /// row 0 at `y_min`.
    pub values: Vec<f64>,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub variant: ToyVariant,
    /// Loss evaluated on the parameters entering each epoch.
    pub losses: Vec<f64>,
    pub grid: DecisionGrid,
    pub final_accuracy: f64,
    /// True if the loss left the finite range; the trace holds the epochs
    /// completed before that.
    pub diverged: bool,
}

fn init_net(variant: ToyVariant, rng: &mut SplitMix64) -> MlpNet {
    let hidden = TOY_HIDDEN_WIDTH;
    let s1 = 1.0 / (2.0_f64).sqrt();
    let s2 = 1.0 / (hidden as f64).sqrt();
    let mut draw = |n: usize, s: f64| -> Vec<f64> {
        (0..n).map(|_| s * rng.next_symmetric()).collect()
    };
    let w1 = Tensor::new([hidden, 2], draw(hidden * 2, s1)).unwrap();
    let gate = match variant {
        ToyVariant::Relu => None,
        ToyVariant::Swiglu => Some(Tensor::new([hidden, 2], draw(hidden * 2, s1)).unwrap()),
    };
    let b1 = draw(hidden, s1);
    let w2 = Tensor::new([1, hidden], draw(hidden, s2)).unwrap();
    let b2 = draw(1, s2);
    MlpNet::new(vec![
        MlpLayer {
            weights: w1,
            gate,
            bias: b1,
            activation: match variant {
                ToyVariant::Relu => Activation::Relu,
                ToyVariant::Swiglu => Activation::Swish(1.0),
            },
        },
        MlpLayer {
            weights: w2,
            gate: None,
            bias: b2,
            activation: Activation::Sigmoid,
        },
    ])
    .expect("toy net dimensions are static")
}

fn dataset_tensors(dataset: &[LabeledPoint]) -> (Tensor, Tensor) {
    let n = dataset.len();
    let mut input = Tensor::zeros([2, n]);
    let mut target = Tensor::zeros([1, n]);
    for (i, p) in dataset.iter().enumerate() {
        input.set2(0, i, p.x);
        input.set2(1, i, p.y);
        target.set2(0, i, if p.label { 1.0 } else { 0.0 });
    }
    (input, target)
}

fn rasterize(net: &MlpNet, dataset: &[LabeledPoint]) -> DecisionGrid {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in dataset {
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    let pad_x = 0.1 * (x_max - x_min).max(1e-9);
    let pad_y = 0.1 * (y_max - y_min).max(1e-9);
    x_min -= pad_x;
    x_max += pad_x;
    y_min -= pad_y;
    y_max += pad_y;

    let res = GRID_RESOLUTION;
    let mut probe = Tensor::zeros([2, res * res]);
    for row in 0..res {
        let y = y_min + (row as f64 + 0.5) / res as f64 * (y_max - y_min);
        for col in 0..res {
            let x = x_min + (col as f64 + 0.5) / res as f64 * (x_max - x_min);
            probe.set2(0, row * res + col, x);
            probe.set2(1, row * res + col, y);
        }
    }
    let out = net.forward(&probe).expect("probe shapes are static");
    DecisionGrid {
        x_min,
        x_max,
        y_min,
        y_max,
        resolution: res,
        values: out.as_slice().to_vec(),
    }
}

/// Train a two-layer classifier on the dataset with full-batch gradient
/// descent. Deterministic given `cfg.seed`; a non-finite loss ends the run
/// early with `diverged` set instead of panicking.
pub fn train_toy_classifier(
    variant: ToyVariant,
    dataset: &[LabeledPoint],
    cfg: &TrainConfig,
) -> Result<TrainingTrace, KernelError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(KernelError::InvalidParameter {
            name: "dataset",
            message: "dataset must not be empty".into(),
        });
    }
    if dataset.iter().all(|p| p.label) || dataset.iter().all(|p| !p.label) {
        return Err(KernelError::InvalidParameter {
            name: "dataset",
            message: "dataset must contain both classes".into(),
        });
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let mut net = init_net(variant, &mut rng);
    let (input, target) = dataset_tensors(dataset);

    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;
    for _ in 0..cfg.epochs {
        let loss = evaluate_loss(&net, &input, &target, cfg.loss)?;
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        losses.push(loss);
        let grads = backward_pass(&net, &input, &target, cfg.loss)?;
        match sgd_step(&net, &grads, cfg) {
            Ok(next) => net = next,
            // Non-finite parameters surface as a construction error; treat
            // that as divergence rather than a crash.
            Err(KernelError::NonFinite { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let output = net.forward(&input)?;
    let mut correct = 0usize;
    for (i, p) in dataset.iter().enumerate() {
        if (output.at2(0, i) > 0.5) == p.label {
            correct += 1;
        }
    }
    Ok(TrainingTrace {
        variant,
        losses,
        grid: rasterize(&net, dataset),
        final_accuracy: correct as f64 / dataset.len() as f64,
        diverged,
    })
}

/// First epoch whose recorded loss is at or below `threshold`.
pub fn first_epoch_at_or_below(losses: &[f64], threshold: f64) -> Option<usize> {
    losses.iter().position(|&l| l <= threshold)
}

/// CSV with one row per epoch: `epoch,loss_relu,loss_swiglu`.
pub fn loss_csv(relu_losses: &[f64], swiglu_losses: &[f64]) -> String {
    let mut out = String::from("epoch,loss_relu,loss_swiglu\n");
    let epochs = relu_losses.len().max(swiglu_losses.len());
    for e in 0..epochs {
        let fmt = |v: Option<&f64>| match v {
            Some(v) => format!("{v:.12}"),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{e},{},{}",
            fmt(relu_losses.get(e)),
            fmt(swiglu_losses.get(e))
        );
    }
    out
}

/// Render the decision grid with the training points overlaid.
pub fn render_decision_grid(trace: &TrainingTrace, dataset: &[LabeledPoint]) -> String {
    let (w, h) = (480.0, 480.0);
    let grid = &trace.grid;
    let view = DataViewport {
        x_min: grid.x_min,
        x_max: grid.x_max,
        y_min: grid.y_min,
        y_max: grid.y_max,
        width: w,
        height: h,
        margin: 10.0,
    };
    let mut doc = SvgDoc::new(w, h);
    let res = grid.resolution;
    let cell_w = (w - 2.0 * view.margin) / res as f64;
    let cell_h = (h - 2.0 * view.margin) / res as f64;
    for row in 0..res {
        for col in 0..res {
            let p = grid.values[row * res + col];
            let fill = if p > 0.5 { "#f9d5b5" } else { "#c6dcef" };
            // Row 0 sits at y_min, which is the bottom of the viewport.
            let x = view.margin + col as f64 * cell_w;
            let y = h - view.margin - (row + 1) as f64 * cell_h;
            doc.rect(x, y, cell_w + 0.5, cell_h + 0.5, &format!("fill:{fill}"), None);
        }
    }
    for p in dataset {
        let color = if p.label { "#d6604d" } else { "#4393c3" };
        doc.circle(
            view.px(p.x),
            view.py(p.y),
            3.0,
            &format!("fill:{color};stroke:#333333;stroke-width:0.5"),
            None,
        );
    }
    let label = match trace.variant {
        ToyVariant::Relu => "relu",
        ToyVariant::Swiglu => "swiglu",
    };
    doc.text(
        14.0,
        20.0,
        13.0,
        &format!("{label}: final loss {:.5}", trace.losses.last().copied().unwrap_or(f64::NAN)),
    );
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::LossKind;

    fn default_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 500,
            seed,
            loss: LossKind::MeanSquaredError,
        }
    }

    #[test]
    fn separable_blobs_reach_full_accuracy_for_both_variants() {
        let data = two_blobs(40, 3.0, 0.5, 9);
        for variant in [ToyVariant::Relu, ToyVariant::Swiglu] {
            let trace = train_toy_classifier(variant, &data, &default_cfg(1)).unwrap();
            assert!(!trace.diverged);
            assert_eq!(trace.final_accuracy, 1.0, "{variant:?}");
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_traces() {
        let data = two_moons(50, 2.5, 0.375, 4);
        let a = train_toy_classifier(ToyVariant::Swiglu, &data, &default_cfg(7)).unwrap();
        let b = train_toy_classifier(ToyVariant::Swiglu, &data, &default_cfg(7)).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.grid.values, b.grid.values);
    }

    #[test]
    fn losses_are_recorded_per_epoch() {
        let data = two_blobs(10, 2.0, 0.3, 2);
        let cfg = TrainConfig {
            epochs: 25,
            ..default_cfg(3)
        };
        let trace = train_toy_classifier(ToyVariant::Relu, &data, &cfg).unwrap();
        assert_eq!(trace.losses.len(), 25);
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let data: Vec<LabeledPoint> = (0..10)
            .map(|i| LabeledPoint {
                x: i as f64,
                y: 0.0,
                label: true,
            })
            .collect();
        assert!(train_toy_classifier(ToyVariant::Relu, &data, &default_cfg(0)).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(two_moons(30, 2.5, 0.375, 11), two_moons(30, 2.5, 0.375, 11));
        assert_eq!(two_blobs(30, 2.0, 0.4, 11), two_blobs(30, 2.0, 0.4, 11));
    }

    #[test]
    fn csv_has_header_and_one_row_per_epoch() {
        let csv = loss_csv(&[0.5, 0.4], &[0.6, 0.3]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,loss_relu,loss_swiglu");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0.5"));
    }
}
