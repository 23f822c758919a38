//! b-bit one-hot expansion of hash signatures.
//!
//! Sample `j` keeps the lowest `b` bits of its coordinate index and lights
//! one position in block `j` of width `2^b`. The result is a binary vector of
//! length `k * 2^b` with exactly `k` ones. `tstar` is dropped.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gcws::HashSignature;
use crate::vectorspace::SparseVector;

/// Largest supported bit width.
pub const MAX_BITS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub b: u32,
    pub k: usize,
}

impl FeatureConfig {
    pub fn new(b: u32, k: usize) -> Result<Self> {
        if b == 0 || b > MAX_BITS {
            return Err(Error::InvalidParameter("b must be between 1 and 24"));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1"));
        }
        Ok(FeatureConfig { b, k })
    }

    pub fn block_width(&self) -> usize {
        1usize << self.b
    }

    pub fn dim(&self) -> usize {
        self.k * self.block_width()
    }
}

/// Positions of the ones in a `k * 2^b` binary vector, ascending, one per
/// block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFeatureVector {
    dim: usize,
    ones: Vec<usize>,
}

impl BinaryFeatureVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ones(&self) -> &[usize] {
        &self.ones
    }

    /// Number of positions set in both vectors.
    pub fn dot(&self, other: &BinaryFeatureVector) -> Result<usize> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let (mut a, mut b, mut n) = (0, 0, 0);
        while a < self.ones.len() && b < other.ones.len() {
            match self.ones[a].cmp(&other.ones[b]) {
                core::cmp::Ordering::Less => a += 1,
                core::cmp::Ordering::Greater => b += 1,
                core::cmp::Ordering::Equal => {
                    n += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        Ok(n)
    }

    /// Real-valued view with unit values, for the linear trainer.
    pub fn to_sparse(&self) -> SparseVector {
        SparseVector::new(self.dim, self.ones.iter().map(|&i| (i, 1.0)))
            .expect("ones are sorted and in range")
    }
}

/// One-hot encodes the lowest `b` bits of each sample's coordinate.
pub fn encode(sig: &HashSignature, fc: &FeatureConfig) -> Result<BinaryFeatureVector> {
    if sig.k() != fc.k {
        return Err(Error::SampleCountMismatch {
            expected: fc.k,
            found: sig.k(),
        });
    }
    let width = fc.block_width();
    let mask = width - 1;
    let ones = sig
        .samples()
        .iter()
        .enumerate()
        .map(|(j, s)| j * width + (s.istar & mask))
        .collect();
    Ok(BinaryFeatureVector {
        dim: fc.dim(),
        ones,
    })
}
