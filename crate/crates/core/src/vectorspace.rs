//! Signed sparse vectors and the positive/negative split into a nonnegative
//! vector of twice the dimension.
//!
//! Original coordinate `i` maps to slot `2i` when its value is positive and to
//! slot `2i + 1` (holding the magnitude) when negative. Zeros are never stored.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::power;

/// A signed vector in `dim` dimensions with strictly increasing indices and
/// no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

fn validate(dim: usize, indices: &[usize], values: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut prev: Option<usize> = None;
    for (&index, &value) in indices.iter().zip(values) {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        if prev.is_some_and(|p| index <= p) {
            return Err(Error::UnsortedIndex { index });
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { index });
        }
        if value == 0.0 {
            return Err(Error::StoredZero { index });
        }
        prev = Some(index);
    }
    Ok(())
}

impl SparseVector {
    /// Builds a vector from `(index, value)` pairs, validating every invariant.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let (indices, values): (Vec<usize>, Vec<f64>) = entries.into_iter().unzip();
        validate(dim, &indices, &values)?;
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    /// Keeps the nonzero entries of a dense slice.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::new(
            dense.len(),
            dense.iter().copied().enumerate().filter(|&(_, x)| x != 0.0),
        )
    }

    /// The all-zero vector.
    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(dim, core::iter::empty())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = alloc::vec![0.0; self.dim];
        for (i, x) in self.iter() {
            dense[i] = x;
        }
        dense
    }

    /// Same vector viewed in a larger space. Shrinking below the largest
    /// stored index is an error.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if let Some(&last) = self.indices.last() {
            if last >= dim {
                return Err(Error::IndexOutOfRange { index: last, dim });
            }
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn negated(&self) -> Self {
        SparseVector {
            dim: self.dim,
            indices: self.indices.clone(),
            values: self.values.iter().map(|x| -x).collect(),
        }
    }

    /// Sum of absolute values.
    pub fn l1_mass(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                core::cmp::Ordering::Less => a += 1,
                core::cmp::Ordering::Greater => b += 1,
                core::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        Ok(acc)
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }
}

/// The nonnegative, doubled-dimension image of a [`SparseVector`].
///
/// Every stored value is strictly positive and each original coordinate
/// occupies at most one of its two slots.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl TransformedVector {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let (indices, values): (Vec<usize>, Vec<f64>) = entries.into_iter().unzip();
        Self::from_parts(dim, indices, values)
    }

    fn from_parts(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if !dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "transformed dimension must be even",
            ));
        }
        validate(dim, &indices, &values)?;
        if values.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter(
                "transformed values must be positive",
            ));
        }
        if indices.windows(2).any(|w| w[0] / 2 == w[1] / 2) {
            return Err(Error::InvalidParameter(
                "both slots of one original coordinate are occupied",
            ));
        }
        Ok(TransformedVector {
            dim,
            indices,
            values,
        })
    }

    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::new(
            dense.len(),
            dense.iter().copied().enumerate().filter(|&(_, x)| x != 0.0),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = alloc::vec![0.0; self.dim];
        for (i, x) in self.iter() {
            dense[i] = x;
        }
        dense
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Every value multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter("scale must be positive and finite"));
        }
        Self::from_parts(
            self.dim,
            self.indices.clone(),
            self.values.iter().map(|x| x * c).collect(),
        )
    }

    /// Every value raised to `gamma`, through the same power routine the
    /// kernels use.
    pub fn powered(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter("power must be positive and finite"));
        }
        let values: Vec<f64> = self.values.iter().map(|&x| power(x, gamma)).collect();
        Self::from_parts(self.dim, self.indices.clone(), values)
    }

    /// Folds each slot pair back into one signed coordinate.
    pub fn restore(&self) -> SparseVector {
        SparseVector {
            dim: self.dim / 2,
            indices: self.indices.iter().map(|i| i / 2).collect(),
            values: self
                .iter()
                .map(|(i, x)| if i % 2 == 0 { x } else { -x })
                .collect(),
        }
    }
}

/// Splits a signed vector into positive and negated-negative slots.
///
/// Values are copied, never recomputed, so the l1 mass is preserved exactly.
pub fn transform(u: &SparseVector) -> TransformedVector {
    let mut indices = Vec::with_capacity(u.nnz());
    let mut values = Vec::with_capacity(u.nnz());
    for (i, x) in u.iter() {
        if x > 0.0 {
            indices.push(2 * i);
            values.push(x);
        } else {
            indices.push(2 * i + 1);
            values.push(-x);
        }
    }
    TransformedVector {
        dim: 2 * u.dim(),
        indices,
        values,
    }
}

/// Sum of absolute values of `u`.
pub fn l1_mass(u: &SparseVector) -> f64 {
    u.l1_mass()
}
