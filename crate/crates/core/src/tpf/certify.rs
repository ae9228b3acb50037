//! Finite-domain check that early-round features carry information about
//! the share outcome.

use crate::infotheory::{
    map_predictor, nonindependence_certificate, predictor_accuracy, JointRun, NonIndependenceCertificate, Predictor,
};
use crate::sha_twin::{Features, FEATURE_COUNT};

/// Cut points, as quantiles of the training rows.
pub const QUANTILES: [f64; 7] = [1.0 / 64.0, 1.0 / 16.0, 0.25, 0.5, 0.75, 15.0 / 16.0, 63.0 / 64.0];
pub const BINS_PER_FEATURE: u32 = QUANTILES.len() as u32 + 1;

/// Per-feature quantile bucketing.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    cuts: [[f64; QUANTILES.len()]; FEATURE_COUNT],
}

impl Quantizer {
    pub fn fit(rows: &[Features]) -> Self {
        let mut cuts = [[0.0; QUANTILES.len()]; FEATURE_COUNT];
        for (j, c) in cuts.iter_mut().enumerate() {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            for (q, cut) in QUANTILES.iter().zip(c.iter_mut()) {
                *cut = if col.is_empty() { 0.0 } else { col[((q * col.len() as f64) as usize).min(col.len() - 1)] };
            }
        }
        Self { cuts }
    }

    /// Mixed-radix bucket index over all features.
    pub fn bucket(&self, row: &Features) -> u32 {
        self.cuts.iter().zip(row).fold(0, |acc, (cuts, x)| {
            let b = cuts.iter().filter(|c| x >= c).count() as u32;
            acc * BINS_PER_FEATURE + b
        })
    }
}

/// `(bucket, share)` pairs.
pub type BucketRecord = (u32, bool);

fn labels(records: &[BucketRecord]) -> Vec<u32> {
    let mut seen: Vec<u32> = records.iter().map(|r| r.0).collect();
    seen.sort_unstable();
    seen.dedup();
    seen
}

/// Empirical joint over the buckets present in `records`.
pub fn bucket_joint(records: &[BucketRecord]) -> Option<JointRun<u32, bool>> {
    JointRun::empirical(labels(records), vec![true, false], records).ok()
}

/// Fits the per-bucket majority predictor on `train` and scores it on
/// `eval`. A certificate is returned only when the accuracy beats the
/// max-mass baseline by more than three binomial standard errors.
pub fn certify_nonindependence(
    train: &[BucketRecord],
    eval: &[BucketRecord],
) -> Option<NonIndependenceCertificate<u32, bool>> {
    let train_joint = bucket_joint(train)?;
    let fitted = map_predictor(&train_joint);
    // Buckets unseen in training get the training majority label.
    let tc = train_joint.column_sums();
    let fallback = tc[0] > tc[1];
    let joint = bucket_joint(eval)?;
    let g = Predictor::from_fn(joint.left(), |x| fitted.predict(x).copied().unwrap_or(fallback));
    let accuracy = predictor_accuracy(&joint, &g).ok()?;
    let cols = joint.column_sums();
    let baseline = cols[0].max(cols[1]);
    let sigma = (baseline * (1.0 - baseline) / eval.len() as f64).sqrt();
    if accuracy - baseline <= 3.0 * sigma {
        return None;
    }
    nonindependence_certificate(&joint, &g).ok().flatten()
}
