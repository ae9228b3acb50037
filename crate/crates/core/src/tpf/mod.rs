//! Early abort of jobs that are unlikely to produce a share.

mod certify;
mod classifier;
mod experiment;
mod ledger;

pub use certify::{bucket_joint, certify_nonindependence, BucketRecord, Quantizer, BINS_PER_FEATURE, QUANTILES};
pub use classifier::{
    classify, train_classifier, Classifier, Example, TrainOutcome, TrainParams, LAYER_SIZES, PARAMETER_COUNT,
};
pub use experiment::{
    calibrate_threshold, run_tpf_experiment, tpf_study, AbortPolicy, TpfConfig, TpfRecord, TpfRun, TpfStudy,
};
pub use ledger::{
    equivalent_hashrate, realized_savings, theoretical_savings, ConfusionMatrix, EnergyLedger, ROUNDS_NOMINAL,
};

use thiserror::Error;

use crate::sha_twin::TwinError;

#[derive(Debug, Error, PartialEq)]
pub enum TpfError {
    #[error("need 0 <= k <= n and n > 0 (k = {k}, n = {n})")]
    Rounds { k: u32, n: u32 },
    #[error("fraction {0} out of range")]
    Fraction(f64),
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("{0}")]
    Config(&'static str),
    #[error("classifier file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("realized savings {realized} exceed the bound {bound}")]
    BoundViolated { realized: f64, bound: f64 },
    #[error(transparent)]
    Twin(#[from] TwinError),
}
