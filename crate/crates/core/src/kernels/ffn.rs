//! Position-wise feed-forward variants: plain ReLU, GELU, and the gated
//! SwiGLU form `Swish_c(xW1 + b1) ⊗ (xV + b1)` with a shared first bias.

use super::activation::{sigmoid, Activation};
use super::{activation, KernelError, Tensor};

/// Feed-forward parameter bundle.
///
/// `gate` (the V matrix) is present only for the SwiGLU variant. The first
/// bias `b1` is shared between the swish branch and the gate branch; `c` is
/// the swish shape parameter (1 recovers `Swish_1`).
#[derive(Debug, Clone)]
pub struct FfnParams {
    pub w1: Tensor,
    pub b1: Vec<f64>,
    pub gate: Option<Tensor>,
    pub c: f64,
    pub w2: Tensor,
    pub b2: Vec<f64>,
}

impl FfnParams {
    pub fn new(
        w1: Tensor,
        b1: Vec<f64>,
        gate: Option<Tensor>,
        c: f64,
        w2: Tensor,
        b2: Vec<f64>,
    ) -> Result<Self, KernelError> {
        if w1.rank() != 2 || w2.rank() != 2 {
            return Err(KernelError::ShapeMismatch {
                context: "ffn weights",
                expected: "rank-2 matrices".into(),
                actual: format!("{:?} / {:?}", w1.shape(), w2.shape()),
            });
        }
        let (d_model, d_ff) = (w1.rows(), w1.cols());
        if w2.rows() != d_ff || w2.cols() != d_model {
            return Err(KernelError::ShapeMismatch {
                context: "ffn second projection",
                expected: format!("{d_ff} x {d_model}"),
                actual: format!("{} x {}", w2.rows(), w2.cols()),
            });
        }
        if b1.len() != d_ff || b2.len() != d_model {
            return Err(KernelError::ShapeMismatch {
                context: "ffn biases",
                expected: format!("b1 len {d_ff}, b2 len {d_model}"),
                actual: format!("b1 len {}, b2 len {}", b1.len(), b2.len()),
            });
        }
        if let Some(v) = &gate {
            if v.rank() != 2 || v.rows() != d_model || v.cols() != d_ff {
                return Err(KernelError::ShapeMismatch {
                    context: "ffn gate projection",
                    expected: format!("{d_model} x {d_ff}"),
                    actual: format!("{:?}", v.shape()),
                });
            }
        }
        if !(c > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "c",
                message: format!("swish shape parameter must be positive, got {c}"),
            });
        }
        Ok(Self {
            w1,
            b1,
            gate,
            c,
            w2,
            b2,
        })
    }

    pub fn d_model(&self) -> usize {
        self.w1.rows()
    }

    pub fn d_ff(&self) -> usize {
        self.w1.cols()
    }
}

/// Feed-forward variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfnVariant {
    Relu,
    Gelu,
    Swiglu,
}

/// Gated first stage: `Swish_c(xW1 + b1) ⊗ (xV + b1)`; output width `d_ff`.
pub fn swiglu(x: &Tensor, params: &FfnParams) -> Result<Tensor, KernelError> {
    let gate = params
        .gate
        .as_ref()
        .ok_or(KernelError::MissingGateProjection)?;
    let swish_branch = x.matmul(&params.w1)?.add_row_bias(&params.b1)?;
    let gate_branch = x.matmul(gate)?.add_row_bias(&params.b1)?;
    let c = params.c;
    let activated = swish_branch.map(|t| t * sigmoid(c * t))?;
    activated.hadamard(&gate_branch)
}

/// Full feed-forward block; output width `d_model`.
pub fn ffn_forward(
    variant: FfnVariant,
    x: &Tensor,
    params: &FfnParams,
) -> Result<Tensor, KernelError> {
    let hidden = match variant {
        FfnVariant::Relu => activation(
            Activation::Relu,
            &x.matmul(&params.w1)?.add_row_bias(&params.b1)?,
        )?,
        FfnVariant::Gelu => activation(
            Activation::Gelu,
            &x.matmul(&params.w1)?.add_row_bias(&params.b1)?,
        )?,
        FfnVariant::Swiglu => swiglu(x, params)?,
    };
    hidden.matmul(&params.w2)?.add_row_bias(&params.b2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_1d(w1: f64, v: f64, b1: f64, c: f64, w2: f64, b2: f64) -> FfnParams {
        FfnParams::new(
            Tensor::new([1, 1], vec![w1]).unwrap(),
            vec![b1],
            Some(Tensor::new([1, 1], vec![v]).unwrap()),
            c,
            Tensor::new([1, 1], vec![w2]).unwrap(),
            vec![b2],
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_gate_output() {
        let p = params_1d(0.0, 0.0, 0.0, 1.0, 1.0, 0.0);
        let x = Tensor::new([1, 1], vec![3.7]).unwrap();
        assert_eq!(swiglu(&x, &p).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn scalar_swiglu_matches_hand_computation() {
        // x=1, W1=V=1, b1=0, c=1: swish_1(1) * 1 = 0.7310586...
        let p = params_1d(1.0, 1.0, 0.0, 1.0, 1.0, 0.0);
        let x = Tensor::new([1, 1], vec![1.0]).unwrap();
        let y = swiglu(&x, &p).unwrap();
        assert!((y.as_slice()[0] - 0.731_058_578_630_004_9).abs() < 1e-9);
    }

    #[test]
    fn zero_input_gives_zero_when_bias_is_zero() {
        let p = params_1d(0.4, -0.9, 0.0, 1.0, 1.0, 0.0);
        let x = Tensor::new([1, 1], vec![0.0]).unwrap();
        assert_eq!(swiglu(&x, &p).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn missing_gate_is_a_configuration_error() {
        let p = FfnParams::new(
            Tensor::zeros([1, 1]),
            vec![0.0],
            None,
            1.0,
            Tensor::zeros([1, 1]),
            vec![0.0],
        )
        .unwrap();
        let x = Tensor::new([1, 1], vec![1.0]).unwrap();
        assert_eq!(
            swiglu(&x, &p).unwrap_err(),
            KernelError::MissingGateProjection
        );
    }

    #[test]
    fn relu_variant_with_zero_first_stage_broadcasts_b2() {
        let p = FfnParams::new(
            Tensor::zeros([3, 4]),
            vec![0.0; 4],
            None,
            1.0,
            Tensor::zeros([4, 3]),
            vec![1.5, -2.0, 0.25],
        )
        .unwrap();
        let x = Tensor::from_rows(&[vec![0.3, -1.0, 2.0], vec![5.0, 5.0, 5.0]]).unwrap();
        let y = ffn_forward(FfnVariant::Relu, &x, &p).unwrap();
        assert_eq!(y.row(0), &[1.5, -2.0, 0.25]);
        assert_eq!(y.row(1), &[1.5, -2.0, 0.25]);
    }

    #[test]
    fn swiglu_variant_is_gate_then_linear() {
        let mut rng = crate::rng::SplitMix64::new(9);
        let draw = |rng: &mut crate::rng::SplitMix64, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.next_symmetric()).collect()
        };
        let p = FfnParams::new(
            Tensor::new([3, 5], draw(&mut rng, 15)).unwrap(),
            draw(&mut rng, 5),
            Some(Tensor::new([3, 5], draw(&mut rng, 15)).unwrap()),
            1.0,
            Tensor::new([5, 3], draw(&mut rng, 15)).unwrap(),
            draw(&mut rng, 3),
        )
        .unwrap();
        let x = Tensor::new([2, 3], draw(&mut rng, 6)).unwrap();
        let direct = ffn_forward(FfnVariant::Swiglu, &x, &p).unwrap();
        let composed = swiglu(&x, &p)
            .unwrap()
            .matmul(&p.w2)
            .unwrap()
            .add_row_bias(&p.b2)
            .unwrap();
        assert_eq!(direct, composed);
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let p = FfnParams::new(
            Tensor::zeros([3, 4]),
            vec![0.0; 4],
            None,
            1.0,
            Tensor::zeros([4, 3]),
            vec![0.0; 3],
        )
        .unwrap();
        let x = Tensor::zeros([2, 5]);
        assert!(matches!(
            ffn_forward(FfnVariant::Relu, &x, &p),
            Err(KernelError::ShapeMismatch { .. })
        ));
    }
}
