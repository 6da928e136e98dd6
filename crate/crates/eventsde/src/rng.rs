//! Counter-based random number generation.
//!
//! Every value is a pure function of a seed and one or two counters, built on
//! splitmix64-style mixing. Regeneration is order-independent: the k-th draw
//! can be produced without generating the first k-1.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless hash of a seed and a counter.
#[inline]
pub fn hash2(seed: u64, counter: u64) -> u64 {
    mix(seed.wrapping_add(GOLDEN.wrapping_mul(counter.wrapping_add(1))))
}

#[inline]
pub fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    hash2(hash2(seed, a), b)
}

/// Maps 64 random bits to a uniform sample in (0, 1].
#[inline]
pub fn uniform_open_closed(bits: u64) -> f64 {
    (((bits >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw keyed by (seed, key, draw index), via Box-Muller.
#[inline]
pub fn standard_normal(seed: u64, key: u64, draw: u64) -> f64 {
    let u1 = uniform_open_closed(hash3(seed, key, 2 * draw));
    let u2 = uniform_open_closed(hash3(seed, key, 2 * draw + 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Derives an independent sub-seed from a purpose string, so distinct random
/// streams (driver noise, transition uniforms, initial clocks) never collide.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = seed;
    for byte in purpose.as_bytes() {
        h = hash2(h, u64::from(*byte));
    }
    mix(h)
}

/// Per-sample seed for batch work: `seed XOR hash(sample index)`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    seed ^ hash2(0, index)
}

/// A stream of uniform samples in (0, 1] addressed by counter.
#[derive(Debug, Clone, Copy)]
pub struct UniformStream {
    seed: u64,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn draw(&self, counter: u64) -> f64 {
        uniform_open_closed(hash2(self.seed, counter))
    }
}
