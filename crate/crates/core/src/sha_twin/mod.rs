//! Bit-exact double SHA-256 with round traces, share targets, and a
//! parametric thermal timing model of a mining device.

mod conditional;
mod device;
mod features;
mod header;
pub mod sha256;
mod target;

pub use conditional::{conditional_success_estimate, EarlyBucket, SuccessEstimate, MIN_BUDGET};
pub use device::{
    delta_t_exact, device_noise, early_statistic, evaluate_job, simulate_timing, DeviceProfile, Job, JobEvaluation,
    JobOutcome, LeakMode, ThermalState, TimingSample, Twin, TwinError, MAX_ROUNDS,
};
pub use features::{early_round_features, raw_features, FeatureScaler, Features, FEATURE_COUNT};
pub use header::{display_hex, double_sha_header, BlockHeader, HeaderTemplate};
pub use sha256::{sha256, sha256_with_trace, sha256d, RoundTrace, ShaError};
pub use target::{
    compact_to_target, diff1_target, meets_target, share_target, target_for, ShareConvention, TargetError, Threshold,
};
