//! Dense row-major tensor used by every numerical kernel in this crate.
//!
//! Deliberately minimal: `f64` storage, explicit loops, no broadcasting
//! magic. All shapes are validated up front so kernels can index freely.

use super::KernelError;

/// Dense real-valued n-dimensional array, row-major.
///
/// Invariants, enforced on construction: every extent is positive,
/// `data.len()` equals the product of extents, and every element is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self, KernelError> {
        let shape = shape.into();
        if shape.is_empty() || shape.iter().any(|&e| e == 0) {
            return Err(KernelError::InvalidShape {
                context: "tensor extents must be positive",
                shape,
            });
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(KernelError::DataLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite {
                context: "tensor element",
                value: *bad,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    /// 2-d constructor from nested rows; every row must have the same width.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(KernelError::InvalidShape {
                context: "from_rows needs at least one non-empty row",
                shape: vec![rows.len()],
            });
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(KernelError::InvalidShape {
                context: "ragged rows",
                shape: vec![rows.len(), width],
            });
        }
        Self::new(
            [rows.len(), width],
            rows.iter().flatten().copied().collect(),
        )
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Number of rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.rank(), 2);
        self.shape[0]
    }

    /// Number of columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.rank(), 2);
        self.shape[1]
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[r * self.shape[1] + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        debug_assert_eq!(self.rank(), 2);
        self.data[r * self.shape[1] + c] = v;
    }

    pub fn at3(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert_eq!(self.rank(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    pub fn set3(&mut self, i: usize, j: usize, k: usize, v: f64) {
        debug_assert_eq!(self.rank(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + k] = v;
    }

    /// Borrow row `r` of a rank-2 tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let w = self.shape[1];
        &self.data[r * w..(r + 1) * w]
    }

    fn expect_rank2(&self, context: &'static str) -> Result<(), KernelError> {
        if self.rank() != 2 {
            return Err(KernelError::ShapeMismatch {
                context,
                expected: "rank-2 tensor".into(),
                actual: format!("{:?}", self.shape),
            });
        }
        Ok(())
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, KernelError> {
        self.expect_rank2("matmul lhs")?;
        other.expect_rank2("matmul rhs")?;
        let (n, k) = (self.shape[0], self.shape[1]);
        let (k2, m) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(KernelError::ShapeMismatch {
                context: "matmul inner dimension",
                expected: format!("{k} rows"),
                actual: format!("{k2} rows"),
            });
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &other.data[l * m..(l + 1) * m];
                let out_row = &mut out[i * m..(i + 1) * m];
                for j in 0..m {
                    out_row[j] += a * rhs_row[j];
                }
            }
        }
        Tensor::new([n, m], out)
    }

    pub fn transpose(&self) -> Tensor {
        debug_assert_eq!(self.rank(), 2);
        let (n, m) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.data[i * m + j];
            }
        }
        Tensor {
            shape: vec![m, n],
            data: out,
        }
    }

    /// Elementwise map; the result is re-validated for finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Tensor, KernelError> {
        Tensor::new(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip_with(
        &self,
        other: &Tensor,
        context: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, KernelError> {
        if self.shape != other.shape {
            return Err(KernelError::ShapeMismatch {
                context,
                expected: format!("{:?}", self.shape),
                actual: format!("{:?}", other.shape),
            });
        }
        Tensor::new(
            self.shape.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, KernelError> {
        self.zip_with(other, "elementwise add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, KernelError> {
        self.zip_with(other, "elementwise sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor, KernelError> {
        self.zip_with(other, "elementwise product", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Result<Tensor, KernelError> {
        self.map(|v| v * s)
    }

    /// Add a width-matching vector to every row of a rank-2 tensor.
    pub fn add_row_bias(&self, bias: &[f64]) -> Result<Tensor, KernelError> {
        self.expect_rank2("add_row_bias")?;
        if bias.len() != self.shape[1] {
            return Err(KernelError::ShapeMismatch {
                context: "bias width",
                expected: format!("{}", self.shape[1]),
                actual: format!("{}", bias.len()),
            });
        }
        let w = self.shape[1];
        Tensor::new(
            self.shape.clone(),
            self.data
                .iter()
                .enumerate()
                .map(|(i, &v)| v + bias[i % w])
                .collect(),
        )
    }

    /// Maximum absolute difference between two same-shape tensors.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
