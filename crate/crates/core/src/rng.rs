//! Seed plumbing.
//!
//! Two kinds of randomness are used. Sequential streams (channel latency,
//! job templates, training shuffles) come from [`ChaCha8Rng`]. Per-sample
//! device noise comes from a stateless counter-based generator so that any
//! sample can be reproduced from `(seed, device_id, counter)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds several words into one well-mixed key.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Maps 64 random bits to a uniform double in the open interval (0, 1).
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Stateless generator: the value at `counter` depends only on the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key }
    }

    pub fn bits(&self, counter: u64) -> u64 {
        mix64(self.key ^ mix64(counter.wrapping_add(0xD1B5_4A32_D192_ED03)))
    }

    pub fn uniform(&self, counter: u64) -> f64 {
        unit_open(self.bits(counter))
    }

    /// Standard exponential variate (mean 1, variance 1).
    pub fn exponential(&self, counter: u64) -> f64 {
        -self.uniform(counter).ln()
    }
}

/// Sequential stream for a named purpose under an experiment seed.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(&[seed, purpose]))
}

/// Stream purposes, kept distinct so that adding a consumer never shifts
/// another consumer's draws.
pub mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const TEMPLATE: u64 = 2;
    pub const NARMA_INPUT: u64 = 3;
    pub const TRAINING: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SAFETY_KEEP: u64 = 6;
    pub const FETCH: u64 = 7;
    pub const CHALLENGE: u64 = 8;
    pub const DEVICE_NOISE: u64 = 9;
    pub const SPLIT: u64 = 10;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_rng_is_stateless() {
        let g = CounterRng::new(42);
        let a: Vec<u64> = (0..10).map(|c| g.bits(c)).collect();
        let b: Vec<u64> = (0..10).rev().map(|c| g.bits(c)).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn exponential_moments() {
        let g = CounterRng::new(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|c| g.exponential(c)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn unit_open_never_hits_bounds() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
    }
}
