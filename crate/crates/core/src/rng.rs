//! Counter-based randomness.
//!
//! Hash randomness must be a pure function of `(seed, sample, coordinate)` so
//! that every vector hashed under one configuration sees the same variates at
//! the same coordinate. Philox4x32-10 gives exactly that: the master seed is
//! the key and the coordinates form the counter. Nothing is tabulated.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// The Philox4x32 bijection with 10 rounds.
#[inline]
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for r in 0..10 {
        if r > 0 {
            key = [key[0].wrapping_add(W0), key[1].wrapping_add(W1)];
        }
        ctr = round(ctr, key);
    }
    ctr
}

#[inline]
fn split(x: u64) -> [u32; 2] {
    [x as u32, (x >> 32) as u32]
}

/// Uniform on the open interval (0, 1) from the top 52 bits, centred in its
/// cell. Neither endpoint is reachable, so `ln` of the result is finite.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline]
fn join(hi: u32, lo: u32) -> u64 {
    (u64::from(hi) << 32) | u64::from(lo)
}

/// Unit-rate Gamma(2, 1) as the sum of two unit exponentials.
#[inline]
fn gamma2(block: [u32; 4]) -> f64 {
    -libm::log(open_unit(join(block[0], block[1]))) - libm::log(open_unit(join(block[2], block[3])))
}

/// The per-coordinate variates consumed by one GCWS sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateRandoms {
    /// Gamma(2, 1).
    pub r: f64,
    /// Gamma(2, 1).
    pub c: f64,
    /// Uniform on [0, 1).
    pub beta: f64,
}

/// Variates for sample `sample` at coordinate `coord` under `seed`.
#[inline]
pub fn draw_randoms(seed: u64, sample: u32, coord: usize) -> CoordinateRandoms {
    let key = split(seed);
    let [c0, c1] = split(coord as u64);
    let block = |b: u32| philox4x32([c0, c1, sample, b], key);
    let b2 = block(2);
    CoordinateRandoms {
        r: gamma2(block(0)),
        c: gamma2(block(1)),
        beta: open_unit(join(b2[0], b2[1])),
    }
}

/// Source of per-coordinate randomness for hashing.
///
/// Implementations must be pure: the same `(sample, coord)` always yields
/// the same triple.
pub trait RandomSource {
    fn draw(&self, sample: u32, coord: usize) -> CoordinateRandoms;
}

/// The default Philox-backed source keyed by a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededSource {
    pub seed: u64,
}

impl RandomSource for SeededSource {
    #[inline]
    fn draw(&self, sample: u32, coord: usize) -> CoordinateRandoms {
        draw_randoms(self.seed, sample, coord)
    }
}

/// SplitMix64 finalizer; used to derive independent keys and digests.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A sequential stream over Philox blocks, for shuffles and synthetic data.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: [u32; 2],
    stream: u64,
    counter: u64,
    buf: [u32; 4],
    pos: usize,
}

impl CounterRng {
    /// Stream `stream` under `seed`. Keys are derived so these streams never
    /// coincide with hash randomness for the same seed.
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: split(mix64(seed ^ 0x5EED_0FC0_FFEE)),
            stream,
            counter: 0,
            buf: [0; 4],
            pos: 4,
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            let [a, b] = split(self.counter);
            let [c, d] = split(self.stream);
            self.buf = philox4x32([a, b, c, d], self.key);
            self.counter = self.counter.wrapping_add(1);
            self.pos = 0;
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32();
        join(hi, self.next_u32())
    }

    /// Uniform on (0, 1).
    pub fn next_f64(&mut self) -> f64 {
        open_unit(self.next_u64())
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Unbiased integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        // Lemire's multiply-shift with rejection
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
