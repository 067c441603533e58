//! Scaled dot-product attention and its multi-head composition.

use super::{KernelError, Tensor};

/// Row-wise softmax with max-subtraction for overflow stability.
///
/// Works on the last dimension of a rank-2 tensor; each output row is
/// nonnegative and sums to 1.
pub fn softmax(rows: &Tensor) -> Result<Tensor, KernelError> {
    if rows.rank() != 2 {
        return Err(KernelError::ShapeMismatch {
            context: "softmax",
            expected: "rank-2 tensor".into(),
            actual: format!("{:?}", rows.shape()),
        });
    }
    if rows.cols() == 0 {
        return Err(KernelError::EmptyRow);
    }
    let mut out = Tensor::zeros([rows.rows(), rows.cols()]);
    for r in 0..rows.rows() {
        let row = rows.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (c, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            out.set2(r, c, e);
            sum += e;
        }
        for c in 0..row.len() {
            out.set2(r, c, out.at2(r, c) / sum);
        }
    }
    Ok(out)
}

/// Softmax over a plain slice; used where no tensor wrapping is warranted.
pub(crate) fn softmax_slice(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `softmax(Q K^T / sqrt(d)) V` with d the key width.
///
/// Q is `n x d`, K is `m x d`, V is `m x d_v`; the result is `n x d_v` and
/// every output coordinate is a convex combination of the matching V column.
pub fn scaled_dot_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor, KernelError> {
    for (t, name) in [(q, "Q"), (k, "K"), (v, "V")] {
        if t.rank() != 2 {
            return Err(KernelError::ShapeMismatch {
                context: "attention input",
                expected: "rank-2 tensor".into(),
                actual: format!("{name} has shape {:?}", t.shape()),
            });
        }
    }
    if q.cols() != k.cols() {
        return Err(KernelError::ShapeMismatch {
            context: "attention key width",
            expected: format!("{}", q.cols()),
            actual: format!("{}", k.cols()),
        });
    }
    if k.rows() != v.rows() {
        return Err(KernelError::ShapeMismatch {
            context: "attention value count",
            expected: format!("{}", k.rows()),
            actual: format!("{}", v.rows()),
        });
    }
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let scores = q.matmul(&k.transpose())?.scale(scale)?;
    softmax(&scores)?.matmul(v)
}

/// Per-head projection triple.
#[derive(Debug, Clone)]
pub struct HeadProjection {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
}

/// Multi-head attention parameters: `h` projection triples (each
/// `d_model x d_head`) and the output projection (`h*d_head x d_model`).
#[derive(Debug, Clone)]
pub struct MultiHeadParams {
    pub heads: Vec<HeadProjection>,
    pub w_o: Tensor,
}

impl MultiHeadParams {
    pub fn new(heads: Vec<HeadProjection>, w_o: Tensor) -> Result<Self, KernelError> {
        if heads.is_empty() {
            return Err(KernelError::InvalidParameter {
                name: "heads",
                message: "need at least one attention head".into(),
            });
        }
        let d_model = heads[0].w_q.rows();
        let d_head = heads[0].w_q.cols();
        for (i, h) in heads.iter().enumerate() {
            for (m, name) in [(&h.w_q, "w_q"), (&h.w_k, "w_k"), (&h.w_v, "w_v")] {
                if m.rank() != 2 || m.rows() != d_model || m.cols() != d_head {
                    return Err(KernelError::ShapeMismatch {
                        context: "head projection",
                        expected: format!("{d_model} x {d_head}"),
                        actual: format!("head {i} {name}: {:?}", m.shape()),
                    });
                }
            }
        }
        if w_o.rank() != 2 || w_o.rows() != heads.len() * d_head || w_o.cols() != d_model {
            return Err(KernelError::ShapeMismatch {
                context: "output projection",
                expected: format!("{} x {d_model}", heads.len() * d_head),
                actual: format!("{:?}", w_o.shape()),
            });
        }
        Ok(Self { heads, w_o })
    }

    pub fn d_model(&self) -> usize {
        self.heads[0].w_q.rows()
    }

    pub fn d_head(&self) -> usize {
        self.heads[0].w_q.cols()
    }
}

/// `Concat(head_1, ..., head_h) W_O` with each head an independently
/// projected scaled dot-product attention at per-head scaling `sqrt(d_head)`.
pub fn multi_head_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    params: &MultiHeadParams,
) -> Result<Tensor, KernelError> {
    let d_model = params.d_model();
    for (t, name) in [(q, "Q"), (k, "K"), (v, "V")] {
        if t.rank() != 2 || t.cols() != d_model {
            return Err(KernelError::ShapeMismatch {
                context: "multi-head input width",
                expected: format!("{d_model}"),
                actual: format!("{name}: {:?}", t.shape()),
            });
        }
    }
    let n = q.rows();
    let d_head = params.d_head();
    let mut concat = Tensor::zeros([n, params.heads.len() * d_head]);
    for (h, head) in params.heads.iter().enumerate() {
        let out = scaled_dot_attention(
            &q.matmul(&head.w_q)?,
            &k.matmul(&head.w_k)?,
            &v.matmul(&head.w_v)?,
        )?;
        for r in 0..n {
            for c in 0..d_head {
                concat.set2(r, h * d_head + c, out.at2(r, c));
            }
        }
    }
    concat.matmul(&params.w_o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros([n, n]);
        for i in 0..n {
            t.set2(i, i, 1.0);
        }
        t
    }

    #[test]
    fn uniform_logits_give_uniform_weights() {
        let x = Tensor::new([1, 3], vec![0.0, 0.0, 0.0]).unwrap();
        let s = softmax(&x).unwrap();
        for &w in s.as_slice() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_is_stable_under_large_logits() {
        let x = Tensor::new([1, 2], vec![1000.0, 0.0]).unwrap();
        let s = softmax(&x).unwrap();
        assert!((s.at2(0, 0) - 1.0).abs() < 1e-12);
        assert!(s.at2(0, 1).abs() < 1e-12);
    }

    #[test]
    fn softmax_matches_independent_scalar_evaluation() {
        let x = Tensor::new([1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let s = softmax(&x).unwrap();
        let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_7, 0.665_240_955_774_821_9];
        for (got, want) in s.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn single_key_returns_the_single_value_row() {
        let q = Tensor::from_rows(&[vec![0.3, -2.0], vec![9.0, 4.0]]).unwrap();
        let k = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let v = Tensor::from_rows(&[vec![5.0, -1.0, 2.0]]).unwrap();
        let out = scaled_dot_attention(&q, &k, &v).unwrap();
        assert_eq!(out.row(0), v.row(0));
        assert_eq!(out.row(1), v.row(0));
    }

    #[test]
    fn zero_query_averages_value_columns() {
        let q = Tensor::zeros([1, 2]);
        let k = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = Tensor::from_rows(&[vec![2.0, 8.0], vec![4.0, -2.0]]).unwrap();
        let out = scaled_dot_attention(&q, &k, &v).unwrap();
        assert!((out.at2(0, 0) - 3.0).abs() < 1e-15);
        assert!((out.at2(0, 1) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn key_width_mismatch_is_a_shape_error() {
        let q = Tensor::zeros([1, 2]);
        let k = Tensor::zeros([3, 4]);
        let v = Tensor::zeros([3, 4]);
        assert!(scaled_dot_attention(&q, &k, &v).is_err());
    }

    #[test]
    fn single_identity_head_reduces_to_scaled_dot_attention() {
        let d = 3;
        let params = MultiHeadParams::new(
            vec![HeadProjection {
                w_q: identity(d),
                w_k: identity(d),
                w_v: identity(d),
            }],
            identity(d),
        )
        .unwrap();
        let mut rng = crate::rng::SplitMix64::new(21);
        let draw = |rng: &mut crate::rng::SplitMix64, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.next_symmetric()).collect()
        };
        let q = Tensor::new([4, d], draw(&mut rng, 4 * d)).unwrap();
        let k = Tensor::new([5, d], draw(&mut rng, 5 * d)).unwrap();
        let v = Tensor::new([5, d], draw(&mut rng, 5 * d)).unwrap();
        let multi = multi_head_attention(&q, &k, &v, &params).unwrap();
        let single = scaled_dot_attention(&q, &k, &v).unwrap();
        assert!(multi.max_abs_diff(&single) < 1e-15);
    }

    #[test]
    fn output_shape_is_queries_by_d_model() {
        let mut rng = crate::rng::SplitMix64::new(2);
        let draw = |rng: &mut crate::rng::SplitMix64, n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.next_symmetric()).collect()
        };
        let heads = (0..2)
            .map(|_| HeadProjection {
                w_q: Tensor::new([8, 4], draw(&mut rng, 32)).unwrap(),
                w_k: Tensor::new([8, 4], draw(&mut rng, 32)).unwrap(),
                w_v: Tensor::new([8, 4], draw(&mut rng, 32)).unwrap(),
            })
            .collect();
        let params =
            MultiHeadParams::new(heads, Tensor::new([8, 8], draw(&mut rng, 64)).unwrap()).unwrap();
        let q = Tensor::new([5, 8], draw(&mut rng, 40)).unwrap();
        let out = multi_head_attention(&q, &q, &q, &params).unwrap();
        assert_eq!(out.shape(), &[5, 8]);
    }
}
