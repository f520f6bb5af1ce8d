//! Dense row-major tensors.
//!
//! Every activation and parameter block in the screening network is a dense
//! array of 64-bit reals: images are `[channels, height, width]`, convolution
//! kernels `[out_ch, in_ch, 3, 3]`, feature vectors `[dim]`. One flat `Vec`
//! with explicit shape bookkeeping keeps the layer kernels free to walk raw
//! slices, which is what lets the inner loops vectorize.

use crate::error::{OdtError, Result};

/// Dense tensor of 64-bit reals in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor after checking that the value count matches the shape
    /// and that every entry is finite.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(OdtError::validation(format!(
                "tensor shape {shape:?} has an empty or zero axis"
            )));
        }
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(OdtError::validation(format!(
                "tensor shape {shape:?} wants {expect} values, got {}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(OdtError::validation(
                "tensor values must be finite".to_string(),
            ));
        }
        Ok(Self { shape, values })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        assert!(!shape.is_empty() && n > 0, "zero-sized tensor shape {shape:?}");
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    /// Hot-path constructor for values produced inside the layer kernels,
    /// which are finite by construction; skips the O(n) scan.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self { shape, values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Element of a rank-3 tensor at `[c, y, x]`.
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        let (h, w) = (self.shape[1], self.shape[2]);
        self.values[(c * h + y) * w + x]
    }
}

// ==== tests ====
