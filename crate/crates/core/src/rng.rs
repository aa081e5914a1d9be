//! Counter-based deterministic random numbers.
//!
//! A [`KeyedStream`] is a SplitMix64 sequence with random access: the key is
//! derived from a seed, a domain tag and a path of indices, and value `i`
//! is `mix64(key + (i + 1)·γ)`. Any draw can be computed on its own, which
//! makes parallel generation reproducible for any thread count. Not
//! cryptographic.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub u64);

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedStream {
    key: u64,
}

impl KeyedStream {
    pub fn new(seed: Seed, domain: u64, path: &[u64]) -> Self {
        let mut key = mix64(seed.0 ^ mix64(domain.wrapping_add(GOLDEN_GAMMA)));
        for (depth, p) in path.iter().enumerate() {
            let salt = (depth as u64 + 2).wrapping_mul(GOLDEN_GAMMA);
            key = mix64(key ^ mix64(p.wrapping_add(salt)));
        }
        Self { key }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform on `[0, 1)` with 53 random bits; `0.0` is attainable.
    #[inline]
    pub fn unit_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box–Muller on the uniforms at `2c` and `2c + 1`.
    pub fn normal_at(&self, counter: u64) -> f64 {
        // 1 - u lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.unit_at(2 * counter);
        let u2 = self.unit_at(2 * counter + 1);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}
