//! Generalized consistent weighted sampling, modified for the powered GMM
//! kernel.
//!
//! For sample `j`, every stored coordinate `i` of the split vector draws
//! `r_i, c_i ~ Gamma(2, 1)` and `beta_i ~ U(0, 1)`, then computes
//!
//! ```text
//! t_i = floor(gamma * ln(x_i) / r_i + beta_i)
//! a_i = ln(c_i) - r_i * (t_i + 1 - beta_i)
//! ```
//!
//! and the sample is `(argmin_i a_i, t at that i)`. Two vectors collide on
//! the full pair with probability equal to their pGMM similarity; collision
//! on the index alone is a close upper approximation.
//!
//! Zero coordinates never participate (their `a_i` is conceptually `+inf`).
//! Ties in `a_i` go to the lowest coordinate.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{mix64, RandomSource, SeededSource};
use crate::vectorspace::TransformedVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashConfig {
    pub gamma: f64,
    pub k: usize,
    pub seed: u64,
    /// Dimension of the split space (twice the original dimension).
    pub dim: usize,
}

impl HashConfig {
    pub fn new(gamma: f64, k: usize, seed: u64, dim: usize) -> Result<Self> {
        let config = HashConfig {
            gamma,
            k,
            seed,
            dim,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter("gamma must be positive and finite"));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1"));
        }
        if self.k > u32::MAX as usize {
            return Err(Error::InvalidParameter("k must fit in 32 bits"));
        }
        if self.dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(())
    }

    /// Stable 64-bit identifier of this configuration.
    pub fn digest(&self) -> u64 {
        [
            self.gamma.to_bits(),
            self.k as u64,
            self.seed,
            self.dim as u64,
        ]
        .iter()
        .fold(0x6763_7773_u64, |h, &w| mix64(h ^ w))
    }

    /// Bits needed to represent any coordinate index, `ceil(log2(dim))`.
    pub fn bits_available(&self) -> u32 {
        bits_for(self.dim)
    }

    pub fn source(&self) -> SeededSource {
        SeededSource { seed: self.seed }
    }
}

/// `ceil(log2(n))`, at least 1.
pub fn bits_for(n: usize) -> u32 {
    if n <= 2 {
        1
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// One hash sample: the selected coordinate and its quantized level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashSample {
    pub istar: usize,
    pub tstar: i64,
}

/// `k` samples of one vector under one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashSignature {
    digest: u64,
    samples: Vec<HashSample>,
}

impl HashSignature {
    pub fn from_parts(digest: u64, samples: Vec<HashSample>) -> Self {
        HashSignature { digest, samples }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn samples(&self) -> &[HashSample] {
        &self.samples
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }
}

#[inline]
fn sample_from_logs<R: RandomSource>(
    indices: &[usize],
    log_weights: &[f64],
    source: &R,
    sample: u32,
) -> HashSample {
    let mut best = HashSample {
        istar: indices[0],
        tstar: 0,
    };
    let mut best_a = f64::INFINITY;
    for (&i, &lw) in indices.iter().zip(log_weights) {
        let rnd = source.draw(sample, i);
        let t = libm::floor(lw / rnd.r + rnd.beta);
        let a = libm::log(rnd.c) - rnd.r * (t + 1.0 - rnd.beta);
        if a < best_a {
            best_a = a;
            // saturating cast; |t| beyond i64 needs r below ~1e-16
            best = HashSample {
                istar: i,
                tstar: t as i64,
            };
        }
    }
    best
}

fn log_weights(v: &TransformedVector, gamma: f64) -> Vec<f64> {
    v.values().iter().map(|&x| gamma * libm::log(x)).collect()
}

/// Sample `sample` of `v` with an explicit exponent and randomness source.
pub fn hash_one_with<R: RandomSource>(
    v: &TransformedVector,
    gamma: f64,
    source: &R,
    sample: u32,
) -> Result<HashSample> {
    if v.is_zero() {
        return Err(Error::EmptyVector);
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter("gamma must be positive and finite"));
    }
    Ok(sample_from_logs(
        v.indices(),
        &log_weights(v, gamma),
        source,
        sample,
    ))
}

fn check_input(v: &TransformedVector, config: &HashConfig) -> Result<()> {
    config.validate()?;
    if v.dim() != config.dim {
        return Err(Error::DimensionMismatch {
            left: v.dim(),
            right: config.dim,
        });
    }
    if v.is_zero() {
        return Err(Error::EmptyVector);
    }
    Ok(())
}

/// Sample `sample` (0-based, `< k`) of `v` under `config`.
pub fn hash_one(v: &TransformedVector, config: &HashConfig, sample: usize) -> Result<HashSample> {
    check_input(v, config)?;
    if sample >= config.k {
        return Err(Error::InvalidParameter("sample index must be below k"));
    }
    hash_one_with(v, config.gamma, &config.source(), sample as u32)
}

/// All `k` samples of `v` under `config`, using an explicit source.
pub fn signature_with<R: RandomSource>(
    v: &TransformedVector,
    config: &HashConfig,
    source: &R,
) -> Result<HashSignature> {
    check_input(v, config)?;
    let logs = log_weights(v, config.gamma);
    let samples = (0..config.k as u32)
        .map(|j| sample_from_logs(v.indices(), &logs, source, j))
        .collect();
    Ok(HashSignature {
        digest: config.digest(),
        samples,
    })
}

/// All `k` samples of `v` under `config`.
pub fn signature(v: &TransformedVector, config: &HashConfig) -> Result<HashSignature> {
    signature_with(v, config, &config.source())
}

/// Which part of a sample must agree for a collision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionMode {
    /// Both `istar` and `tstar`; unbiased for pGMM.
    Full,
    /// `istar` only.
    IndexOnly,
}

/// Number of samples on which the two signatures collide.
pub fn collision_count(a: &HashSignature, b: &HashSignature, mode: CollisionMode) -> Result<usize> {
    if a.digest != b.digest {
        return Err(Error::ConfigMismatch);
    }
    if a.k() != b.k() {
        return Err(Error::SampleCountMismatch {
            expected: a.k(),
            found: b.k(),
        });
    }
    let hit = |(x, y): (&HashSample, &HashSample)| match mode {
        CollisionMode::Full => x == y,
        CollisionMode::IndexOnly => x.istar == y.istar,
    };
    Ok(a.samples.iter().zip(&b.samples).filter(|&p| hit(p)).count())
}

/// Fraction of colliding samples.
pub fn estimate_collision(
    a: &HashSignature,
    b: &HashSignature,
    mode: CollisionMode,
) -> Result<f64> {
    let hits = collision_count(a, b, mode)?;
    Ok(hits as f64 / a.k() as f64)
}
