#![allow(dead_code)]

use gmmk_core::rng::CounterRng;
use gmmk_core::vectorspace::{transform, SparseVector, TransformedVector};

/// Signed dense vector with roughly `density` nonzeros drawn from N(0, 3^2);
/// never all-zero.
pub fn signed_dense(rng: &mut CounterRng, d: usize, density: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for x in v.iter_mut() {
        if rng.next_f64() < density {
            *x = 3.0 * rng.next_normal();
        }
    }
    if v.iter().all(|&x| x == 0.0) {
        v[rng.below(d as u64) as usize] = 1.0;
    }
    v
}

pub fn signed(rng: &mut CounterRng, d: usize, density: f64) -> SparseVector {
    SparseVector::from_dense(&signed_dense(rng, d, density)).unwrap()
}

pub fn split(rng: &mut CounterRng, d: usize, density: f64) -> TransformedVector {
    transform(&signed(rng, d, density))
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Brute-force min-max ratio over dense nonnegative arrays with `powf`.
pub fn dense_min_max(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += x.min(*y).powf(gamma);
        den += x.max(*y).powf(gamma);
    }
    num / den
}
