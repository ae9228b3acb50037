//! Difficulty to 256-bit threshold conversion.
//!
//! Two conventions are supported. [`ShareConvention::Diff1`] is the pool
//! convention `floor(diff1 / D)` with `diff1` the expansion of compact
//! `0x1d00ffff`, so a random hash passes with probability about
//! `2^-32 / D`. [`ShareConvention::Desk`] divides the full 256-bit range
//! instead, `floor((2^256 - 1) / D)`, so a random hash passes with
//! probability about `1 / D`; the simulated devices use it so that share
//! rates are observable in a few thousand jobs.
//!
//! In both cases a hash is compared as a big-endian integer.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("difficulty must be a finite value >= 1, got {0}")]
    BadDifficulty(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ShareConvention {
    Diff1,
    #[default]
    Desk,
}

/// Expands a compact `bits` field.
pub fn compact_to_target(bits: u32) -> BigUint {
    let exponent = bits >> 24;
    let mantissa = BigUint::from(bits & 0x007f_ffff);
    if exponent <= 3 {
        mantissa >> (8 * (3 - exponent))
    } else {
        mantissa << (8 * (exponent - 3))
    }
}

pub fn diff1_target() -> BigUint {
    compact_to_target(0x1d00ffff)
}

fn max_hash() -> BigUint {
    (BigUint::from(1u8) << 256) - 1u8
}

/// `floor(numerator / d)` for a finite `d >= 1`, exact for any double.
fn divide_by(numerator: BigUint, d: f64) -> Result<BigUint, TargetError> {
    if !(d.is_finite() && d >= 1.0) {
        return Err(TargetError::BadDifficulty(d));
    }
    let bits = d.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    // d = mantissa * 2^shift
    let shift = exp - 1075;
    let m = BigUint::from(mantissa);
    Ok(if shift >= 0 { (numerator >> shift as u64) / m } else { (numerator << (-shift) as u64) / m })
}

/// `floor(diff1 / difficulty)`.
pub fn share_target(difficulty: f64) -> Result<BigUint, TargetError> {
    divide_by(diff1_target(), difficulty)
}

pub fn target_for(convention: ShareConvention, difficulty: f64) -> Result<BigUint, TargetError> {
    match convention {
        ShareConvention::Diff1 => share_target(difficulty),
        ShareConvention::Desk => divide_by(max_hash(), difficulty),
    }
}

/// Precomputed threshold as 32 big-endian bytes, for fast comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Threshold([u8; 32]);

impl Threshold {
    pub fn new(convention: ShareConvention, difficulty: f64) -> Result<Self, TargetError> {
        Ok(Self::from_biguint(&target_for(convention, difficulty)?))
    }

    pub fn from_biguint(t: &BigUint) -> Self {
        let be = t.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - be.len()..].copy_from_slice(&be);
        Self(out)
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Hash, read big-endian, is strictly below the threshold.
    pub fn is_met_by(&self, hash: &[u8; 32]) -> bool {
        hash < &self.0
    }
}

/// Diff1-convention acceptance test.
pub fn meets_target(hash: &[u8; 32], difficulty: f64) -> Result<bool, TargetError> {
    Ok(Threshold::new(ShareConvention::Diff1, difficulty)?.is_met_by(hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff1_expansion() {
        assert_eq!(diff1_target(), BigUint::from(0xffffu32) << 208u32);
        assert_eq!(share_target(1.0).unwrap(), diff1_target());
        assert_eq!(share_target(2.0).unwrap(), diff1_target() / 2u8);
        assert_eq!(share_target(1024.0).unwrap(), diff1_target() >> 10u32);
    }

    #[test]
    fn fractional_difficulty_is_exact_floor() {
        for d in [1.5, 3.0, 7.25, 1e6 + 0.5, 16.0 / 3.0] {
            let t = share_target(d).unwrap();
            // d = m / 2^s exactly; check t * m <= diff1 * 2^s < (t + 1) * m.
            let mut m = d;
            let mut s = 0u32;
            while m.fract() != 0.0 {
                m *= 2.0;
                s += 1;
            }
            let m = BigUint::from(m as u64);
            let lhs = diff1_target() << s;
            assert!(&t * &m <= lhs && lhs < (&t + 1u8) * &m, "d = {d}");
        }
    }

    #[test]
    fn rejects_small_difficulty() {
        assert_eq!(share_target(0.5).unwrap_err(), TargetError::BadDifficulty(0.5));
        assert!(share_target(f64::NAN).is_err());
        assert!(target_for(ShareConvention::Desk, f64::INFINITY).is_err());
    }

    #[test]
    fn meets_target_examples() {
        assert!(meets_target(&[0u8; 32], 1e9).unwrap());
        assert!(!meets_target(&[0xff; 32], 1.0).unwrap());
        let desk = Threshold::new(ShareConvention::Desk, 1.0).unwrap();
        assert!(!desk.is_met_by(&[0xff; 32]));
        let mut almost = [0xff; 32];
        almost[31] = 0xfe;
        assert!(desk.is_met_by(&almost));
    }

    #[test]
    fn genesis_digest_meets_diff1_when_read_as_a_block_hash() {
        use crate::sha_twin::{double_sha_header, BlockHeader};
        let mut h = double_sha_header(&BlockHeader::genesis());
        assert!(!meets_target(&h, 1.0).unwrap());
        h.reverse();
        assert!(meets_target(&h, 1.0).unwrap());
    }

    #[test]
    fn desk_target_for_power_of_two() {
        let t = target_for(ShareConvention::Desk, 16.0).unwrap();
        assert_eq!(t, max_hash() >> 4u32);
        assert_eq!(Threshold::from_biguint(&t).bytes()[0], 0x0f);
    }
}
