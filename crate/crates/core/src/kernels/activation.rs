//! Elementwise activation functions and their derivatives.

use super::{KernelError, Tensor};

/// Logistic sigmoid `1 / (1 + e^-t)`.
pub(crate) fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Standard normal CDF, `0.5 * (1 + erf(t / sqrt(2)))`.
pub(crate) fn std_normal_cdf(t: f64) -> f64 {
    0.5 * (1.0 + libm::erf(t / std::f64::consts::SQRT_2))
}

/// Standard normal PDF.
fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Activation kinds usable both in the FFN variants and in MLP layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    Gelu,
    Sigmoid,
    /// Swish with shape parameter c: `t * sigmoid(c * t)`.
    Swish(f64),
}

impl Activation {
    pub fn apply(&self, t: f64) -> f64 {
        match *self {
            Activation::Identity => t,
            Activation::Relu => t.max(0.0),
            Activation::Gelu => t * std_normal_cdf(t),
            Activation::Sigmoid => sigmoid(t),
            Activation::Swish(c) => t * sigmoid(c * t),
        }
    }

    /// Derivative with respect to the pre-activation. The ReLU derivative
    /// at exactly 0 is taken as 0 (subgradient convention).
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => std_normal_cdf(t) + t * std_normal_pdf(t),
            Activation::Sigmoid => {
                let s = sigmoid(t);
                s * (1.0 - s)
            }
            Activation::Swish(c) => {
                let s = sigmoid(c * t);
                s + c * t * s * (1.0 - s)
            }
        }
    }
}

/// Apply an activation elementwise. Output shape equals input shape.
pub fn activation(kind: Activation, x: &Tensor) -> Result<Tensor, KernelError> {
    if let Activation::Swish(c) = kind {
        if !(c > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "c",
                message: format!("swish shape parameter must be positive, got {c}"),
            });
        }
    }
    x.map(|t| kind.apply(t))
}
