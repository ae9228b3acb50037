//! Early-round feature vector: (timing per round, temperature, voltage).

use super::device::{DeviceProfile, TimingSample, TwinError};

pub const FEATURE_COUNT: usize = 3;
pub type Features = [f64; FEATURE_COUNT];

/// Per-feature standardization fitted on training rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaler {
    pub mean: Features,
    pub scale: Features,
}

impl Default for FeatureScaler {
    fn default() -> Self {
        Self { mean: [0.0; FEATURE_COUNT], scale: [1.0; FEATURE_COUNT] }
    }
}

impl FeatureScaler {
    /// Mean and population standard deviation per column; constant columns
    /// get scale 1 so they map to zero.
    pub fn fit(rows: &[Features]) -> Self {
        if rows.is_empty() {
            return Self::default();
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut scale = [0.0; FEATURE_COUNT];
        for r in rows {
            for j in 0..FEATURE_COUNT {
                scale[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, raw: &Features) -> Features {
        let mut out = [0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            out[j] = (raw[j] - self.mean[j]) / self.scale[j];
        }
        out
    }
}

/// Unscaled features after `k` rounds.
pub fn raw_features(timing: &TimingSample, profile: &DeviceProfile, k: usize) -> Result<Features, TwinError> {
    if !(1..=64).contains(&k) {
        return Err(TwinError::DecisionRound(k));
    }
    Ok([timing.delta_t_ns as f64 / k as f64, timing.temperature, profile.voltage])
}

pub fn early_round_features(
    timing: &TimingSample,
    profile: &DeviceProfile,
    k: usize,
    scaler: &FeatureScaler,
) -> Result<Features, TwinError> {
    Ok(scaler.apply(&raw_features(timing, profile, k)?))
}
