//! Monte Carlo share probability conditioned on early-round state.

use super::device::{evaluate_job, Job, TwinError};
use super::header::HeaderTemplate;
use super::target::ShareConvention;
use crate::rng::{purpose, stream};
use rand::Rng;

pub const MIN_BUDGET: usize = 1000;

/// A set of early-round states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyBucket {
    Any,
    /// Popcount of working variable `a` after `round` lies in `lo..=hi`.
    Popcount {
        round: usize,
        lo: u32,
        hi: u32,
    },
}

impl EarlyBucket {
    pub fn contains(&self, a: &[u32; 64]) -> bool {
        match *self {
            EarlyBucket::Any => true,
            EarlyBucket::Popcount { round, lo, hi } => {
                let pc = a[round.clamp(1, 64) - 1].count_ones();
                (lo..=hi).contains(&pc)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessEstimate {
    pub probability: f64,
    /// Binomial standard error of `probability`.
    pub std_error: f64,
    pub hits: u64,
    /// Draws that fell in the bucket.
    pub in_bucket: u64,
    pub drawn: u64,
}

/// Draws `sample_budget` random jobs and estimates `P(share | bucket)`.
pub fn conditional_success_estimate(
    bucket: EarlyBucket,
    difficulty: f64,
    sample_budget: usize,
    convention: ShareConvention,
    seed: u64,
) -> Result<SuccessEstimate, TwinError> {
    if sample_budget < MIN_BUDGET {
        return Err(TwinError::Budget { min: MIN_BUDGET, got: sample_budget });
    }
    let mut rng = stream(seed, purpose::TEMPLATE);
    let template = HeaderTemplate::random(&mut rng);
    let mut hits = 0u64;
    let mut in_bucket = 0u64;
    for _ in 0..sample_budget {
        let job = Job::new(template, rng.random(), difficulty);
        let eval = evaluate_job(&job, convention)?;
        if bucket.contains(&eval.a) {
            in_bucket += 1;
            hits += eval.success as u64;
        }
    }
    if in_bucket == 0 {
        return Err(TwinError::NoData);
    }
    let p = hits as f64 / in_bucket as f64;
    Ok(SuccessEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / in_bucket as f64).sqrt(),
        hits,
        in_bucket,
        drawn: sample_budget as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_and_empty_bucket() {
        assert!(matches!(
            conditional_success_estimate(EarlyBucket::Any, 2.0, 999, ShareConvention::Desk, 0),
            Err(TwinError::Budget { .. })
        ));
        let impossible = EarlyBucket::Popcount { round: 5, lo: 40, hi: 50 };
        assert_eq!(
            conditional_success_estimate(impossible, 2.0, 1000, ShareConvention::Desk, 0).unwrap_err(),
            TwinError::NoData
        );
    }

    #[test]
    fn difficulty_one_desk_always_passes() {
        let e = conditional_success_estimate(EarlyBucket::Any, 1.0, 2000, ShareConvention::Desk, 4).unwrap();
        assert_eq!(e.probability, 1.0);
    }
}
