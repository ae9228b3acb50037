//! Early-abort experiment on a twin: train on observed early-round
//! features, calibrate a threshold, then run an evaluation stream with the
//! abort policy in the loop.

use rand::Rng;

use super::certify::{certify_nonindependence, BucketRecord, Quantizer};
use super::classifier::{train_classifier, Classifier, Example, TrainParams};
use super::ledger::{realized_savings, theoretical_savings, ConfusionMatrix, EnergyLedger, ROUNDS_NOMINAL};
use super::TpfError;
use crate::infotheory::NonIndependenceCertificate;
use crate::rng::{derive_key, purpose, stream, CounterRng};
use crate::sha_twin::{raw_features, DeviceProfile, Features, HeaderTemplate, Job, ThermalState, Twin};

#[derive(Debug, Clone, PartialEq)]
pub struct AbortPolicy {
    /// Decision round.
    pub k: u32,
    /// Abort when the share score falls below this.
    pub theta: f64,
    /// Fraction of would-abort jobs run to completion anyway.
    pub safety_keep_rate: f64,
    pub classifier: Classifier,
}

impl AbortPolicy {
    pub const DEFAULT_SAFETY_KEEP_RATE: f64 = 0.02;

    pub fn new(k: u32, theta: f64, safety_keep_rate: f64, classifier: Classifier) -> Result<Self, TpfError> {
        if !(1..=64).contains(&k) {
            return Err(TpfError::Rounds { k, n: ROUNDS_NOMINAL });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(TpfError::Fraction(theta));
        }
        if !(0.0..=1.0).contains(&safety_keep_rate) {
            return Err(TpfError::Fraction(safety_keep_rate));
        }
        Ok(Self { k, theta, safety_keep_rate, classifier })
    }

    pub fn would_abort(&self, score_success: f64) -> bool {
        score_success < self.theta
    }
}

/// Half the lowest share score among training shares.
pub fn calibrate_threshold(classifier: &Classifier, train: &[Example]) -> Result<f64, TpfError> {
    train
        .iter()
        .filter(|e| e.1)
        .map(|(x, _)| classifier.score(x).0)
        .min_by(f64::total_cmp)
        .map(|m| m / 2.0)
        .ok_or(TpfError::SingleClass)
}

/// One evaluated job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpfRecord {
    pub features: Features,
    pub score: f64,
    pub success: bool,
    pub would_abort: bool,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpfRun {
    pub confusion: ConfusionMatrix,
    pub ledger: EnergyLedger,
    pub records: Vec<TpfRecord>,
    /// Times the savings bound was checked (once per job).
    pub bound_checks: u64,
}

/// Runs `n_jobs` through `twin` with `policy` in the loop. Jobs use
/// sequence numbers `first_sequence..`. The realized savings are checked
/// against `1 - k/n` after every job.
pub fn run_tpf_experiment(
    twin: &mut Twin,
    policy: &AbortPolicy,
    template: HeaderTemplate,
    difficulty: f64,
    first_sequence: u64,
    n_jobs: usize,
    seed: u64,
) -> Result<TpfRun, TpfError> {
    let bound = theoretical_savings(policy.k, ROUNDS_NOMINAL)?;
    let keep = CounterRng::new(derive_key(&[seed, purpose::SAFETY_KEEP]));
    let mut ledger = EnergyLedger::new(ROUNDS_NOMINAL);
    let mut confusion = ConfusionMatrix::default();
    let mut records = Vec::with_capacity(n_jobs);
    for i in 0..n_jobs {
        let seq = first_sequence + i as u64;
        let job = Job::new(template, Job::extranonce2_for(0, seq), difficulty);
        let early = twin.observe(&job, policy.k)?;
        let features = raw_features(&early.sample, twin.profile(), policy.k as usize)?;
        let score = policy.classifier.score(&features).0;
        let success = early.eval.success;
        let would_abort = policy.would_abort(score);
        let aborted = would_abort && keep.uniform(seq) >= policy.safety_keep_rate;
        let executed = if aborted { policy.k } else { ROUNDS_NOMINAL };
        twin.advance(executed, job.drive());
        ledger.record(executed, aborted, success);
        confusion.record(!would_abort, success);
        let realized = realized_savings(&ledger);
        if realized > bound + 1e-12 || !ledger.is_consistent() {
            return Err(TpfError::BoundViolated { realized, bound });
        }
        records.push(TpfRecord { features, score, success, would_abort, aborted });
    }
    Ok(TpfRun { confusion, ledger, records, bound_checks: n_jobs as u64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpfConfig {
    pub difficulty: f64,
    pub k: u32,
    pub train_jobs: usize,
    pub eval_jobs: usize,
    pub safety_keep_rate: f64,
    /// Training jobs share a random duty cycle in blocks of this size, so
    /// the training set spans the thermal range seen under aborts.
    pub duty_block: usize,
    pub train: TrainParams,
}

impl Default for TpfConfig {
    fn default() -> Self {
        Self {
            difficulty: 64.0,
            k: 5,
            train_jobs: 8000,
            eval_jobs: 4000,
            safety_keep_rate: AbortPolicy::DEFAULT_SAFETY_KEEP_RATE,
            duty_block: 50,
            train: TrainParams::default(),
        }
    }
}

/// Everything one experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TpfStudy {
    pub policy: AbortPolicy,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub run: TpfRun,
    pub realized_savings: f64,
    pub theoretical_savings: f64,
    /// Argmax-classifier accuracy on the evaluation jobs.
    pub accuracy: f64,
    /// Max-mass accuracy on the evaluation jobs.
    pub baseline: f64,
    pub advantage: f64,
    /// Binomial standard error of the baseline.
    pub sigma: f64,
    pub certificate: Option<NonIndependenceCertificate<u32, bool>>,
}

impl TpfStudy {
    /// Advantage more than three standard errors above zero.
    pub fn has_signal(&self) -> bool {
        self.advantage > 3.0 * self.sigma
    }
}

fn collect_training(
    twin: &mut Twin,
    template: HeaderTemplate,
    cfg: &TpfConfig,
    seed: u64,
) -> Result<Vec<Example>, TpfError> {
    let mut rng = stream(seed, purpose::TRAINING);
    let mut duty = 1.0;
    let mut out = Vec::with_capacity(cfg.train_jobs);
    for i in 0..cfg.train_jobs {
        if i % cfg.duty_block.max(1) == 0 {
            duty = rng.random::<f64>();
        }
        let job = Job::new(template, Job::extranonce2_for(0, i as u64), cfg.difficulty);
        let early = twin.observe(&job, cfg.k)?;
        out.push((raw_features(&early.sample, twin.profile(), cfg.k as usize)?, early.eval.success));
        let full = rng.random_bool(duty);
        twin.advance(if full { ROUNDS_NOMINAL } else { cfg.k }, job.drive());
    }
    Ok(out)
}

/// Trains, calibrates, evaluates and certifies on one device.
pub fn tpf_study(profile: &DeviceProfile, cfg: &TpfConfig, seed: u64) -> Result<TpfStudy, TpfError> {
    if cfg.eval_jobs < 2 || cfg.train_jobs < 2 {
        return Err(TpfError::Config("need at least two training and two evaluation jobs"));
    }
    let template = HeaderTemplate::random(&mut stream(seed, purpose::TEMPLATE));
    let state = ThermalState::steady(profile, 0.0);
    let mut twin = Twin::new(profile.clone(), seed)?.with_state(state);
    let train = collect_training(&mut twin, template, cfg, seed)?;
    let hp = TrainParams { seed: derive_key(&[seed, cfg.train.seed]), ..cfg.train };
    let trained = train_classifier(&train, &hp)?;
    let theta = calibrate_threshold(&trained.classifier, &train)?;
    let policy = AbortPolicy::new(cfg.k, theta, cfg.safety_keep_rate, trained.classifier)?;
    let run =
        run_tpf_experiment(&mut twin, &policy, template, cfg.difficulty, cfg.train_jobs as u64, cfg.eval_jobs, seed)?;

    let n = run.records.len() as f64;
    let correct = run.records.iter().filter(|r| (r.score >= 0.5) == r.success).count() as f64;
    let p_success = run.records.iter().filter(|r| r.success).count() as f64 / n;
    let baseline = p_success.max(1.0 - p_success);
    let accuracy = correct / n;
    let sigma = (baseline * (1.0 - baseline) / n).sqrt();

    let quantizer = Quantizer::fit(&train.iter().map(|e| e.0).collect::<Vec<_>>());
    let train_buckets: Vec<BucketRecord> = train.iter().map(|(x, y)| (quantizer.bucket(x), *y)).collect();
    let eval_buckets: Vec<BucketRecord> =
        run.records.iter().map(|r| (quantizer.bucket(&r.features), r.success)).collect();
    let certificate = certify_nonindependence(&train_buckets, &eval_buckets);

    Ok(TpfStudy {
        realized_savings: realized_savings(&run.ledger),
        theoretical_savings: theoretical_savings(cfg.k, ROUNDS_NOMINAL)?,
        initial_loss: trained.initial_loss,
        final_loss: trained.final_loss,
        policy,
        run,
        accuracy,
        baseline,
        advantage: accuracy - baseline,
        sigma,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sha_twin::LeakMode;

    fn small() -> TpfConfig {
        TpfConfig { train_jobs: 1500, eval_jobs: 400, difficulty: 16.0, ..TpfConfig::default() }
    }

    #[test]
    fn never_abort_saves_nothing() {
        let p = DeviceProfile::lv06().with_leak(LeakMode::Leaky);
        let mut twin = Twin::new(p, 1).unwrap();
        let policy = AbortPolicy::new(5, 0.0, 0.02, Classifier::zeros()).unwrap();
        let run =
            run_tpf_experiment(&mut twin, &policy, HeaderTemplate::random(&mut stream(1, 0)), 16.0, 0, 200, 1).unwrap();
        assert_eq!(realized_savings(&run.ledger), 0.0);
        assert_eq!(run.ledger.false_aborts, 0);
        assert_eq!(run.confusion.total(), 200);
        assert_eq!(run.bound_checks, 200);
    }

    #[test]
    fn abort_everything_attains_the_bound() {
        let p = DeviceProfile::lv06();
        let mut twin = Twin::new(p, 2).unwrap();
        let policy = AbortPolicy::new(5, 1.0, 0.0, Classifier::zeros()).unwrap();
        let run =
            run_tpf_experiment(&mut twin, &policy, HeaderTemplate::random(&mut stream(2, 0)), 16.0, 0, 100, 2).unwrap();
        assert_eq!(realized_savings(&run.ledger), 0.921875);
    }

    #[test]
    fn policy_validation_and_monotonicity() {
        assert!(AbortPolicy::new(0, 0.5, 0.0, Classifier::zeros()).is_err());
        assert!(AbortPolicy::new(65, 0.5, 0.0, Classifier::zeros()).is_err());
        assert!(AbortPolicy::new(5, 1.5, 0.0, Classifier::zeros()).is_err());
        let scores = [0.01, 0.2, 0.5, 0.7, 0.99];
        let mut last = 0;
        for t in [0.0, 0.1, 0.3, 0.6, 0.9, 1.0] {
            let p = AbortPolicy::new(5, t, 0.0, Classifier::zeros()).unwrap();
            let n = scores.iter().filter(|s| p.would_abort(**s)).count();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn leaky_study_finds_signal() {
        let p = DeviceProfile::lv06().with_leak(LeakMode::Leaky);
        let s = tpf_study(&p, &small(), 3).unwrap();
        assert!(s.has_signal());
        assert!(s.final_loss < s.initial_loss);
        assert!(s.certificate.is_some());
        assert_eq!(s.run.ledger.false_aborts, 0);
    }

    #[test]
    fn null_study_has_no_signal() {
        let s = tpf_study(&DeviceProfile::lv06(), &small(), 4).unwrap();
        assert!(!s.has_signal(), "advantage {} sigma {}", s.advantage, s.sigma);
        assert!(s.certificate.is_none());
    }
}
