//! NARMA-10 target generation.

use rand::Rng;

use super::ReservoirError;
use crate::rng::{derive_key, purpose, stream};

/// Runs whose `max |y|` exceeds this are rejected.
pub const DIVERGENCE_GUARD: f64 = 10.0;
/// Input range upper bound.
pub const INPUT_MAX: f64 = 0.5;
const ORDER: usize = 10;
const MAX_RESAMPLES: u64 = 64;

/// Input and target sequences. Indices below `warmup` are not scored.
#[derive(Debug, Clone, PartialEq)]
pub struct NarmaSeries {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub warmup: usize,
}

impl NarmaSeries {
    /// Draws `u ~ U[0, 0.5]` from the seed and resamples on divergence.
    pub fn generate(len: usize, warmup: usize, seed: u64) -> Result<Self, ReservoirError> {
        let mut last = None;
        for attempt in 0..MAX_RESAMPLES {
            let mut rng = stream(derive_key(&[seed, attempt]), purpose::NARMA_INPUT);
            let u: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..=INPUT_MAX)).collect();
            match narma10(&u, warmup) {
                Err(e @ ReservoirError::Diverged { .. }) => last = Some(e),
                other => return other,
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `y[t+1] = 0.3 y[t] + 0.05 y[t] sum_{i<10} y[t-i] + 1.5 u[t-9] u[t] + 0.1`,
/// with `y[0..10] = 0`.
pub fn narma10(u: &[f64], warmup: usize) -> Result<NarmaSeries, ReservoirError> {
    narma10_guarded(u, warmup, DIVERGENCE_GUARD)
}

pub fn narma10_guarded(u: &[f64], warmup: usize, guard: f64) -> Result<NarmaSeries, ReservoirError> {
    if u.len() <= warmup + ORDER {
        return Err(ReservoirError::Invalid("series must be longer than warmup + 10"));
    }
    if let Some(&bad) = u.iter().find(|x| !(0.0..=INPUT_MAX).contains(*x)) {
        return Err(ReservoirError::InputRange(bad));
    }
    let mut y = vec![0.0; u.len()];
    for t in ORDER - 1..u.len() - 1 {
        let window: f64 = y[t + 1 - ORDER..=t].iter().sum();
        let next = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * u[t + 1 - ORDER] * u[t] + 0.1;
        if !next.is_finite() || next.abs() > guard {
            return Err(ReservoirError::Diverged { step: t + 1, value: next });
        }
        y[t + 1] = next;
    }
    Ok(NarmaSeries { u: u.to_vec(), y, warmup })
}
