//! Reservoir benchmarks on the twin's timing channel.

mod benchmark;
mod metrics;
mod narma;
mod ridge;
mod sweep;

pub use benchmark::{drive_for_input, narma_channel, run_narma_benchmark, NarmaConfig, NarmaMode, NarmaResult};
pub use metrics::{classify_regime, coefficient_of_variation, nrmse, window_entropy, Regime};
pub use narma::{narma10, narma10_guarded, NarmaSeries, DIVERGENCE_GUARD, INPUT_MAX};
pub use ridge::{normal_equation_residual, ridge_fit, FeatureMatrix, ReadoutWeights};
pub use sweep::{vfd_sweep, windowed_metrics, SweepConfig, SweepRow, MIN_WINDOW_SAMPLES};

use thiserror::Error;

use crate::sha_twin::TwinError;
use crate::swh::SessionError;

#[derive(Debug, Error, PartialEq)]
pub enum ReservoirError {
    #[error("{0}")]
    Invalid(&'static str),
    #[error("input {0} outside [0, 0.5]")]
    InputRange(f64),
    #[error("series diverged at step {step} (y = {value})")]
    Diverged { step: usize, value: f64 },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Twin(#[from] TwinError),
}
