//! Seeded numerical check of the information-theory identities on random
//! finite joints. Shared by the test suite and the `selftest` subcommand.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    entropy, entropy_identity, enumerate_predictors, is_independent, kl_divergence, map_predictor, max_mass,
    mutual_info, predictor_accuracy, FiniteDistribution, JointRun,
};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfTestConfig {
    pub seed: u64,
    /// Random cases per identity check.
    pub cases: usize,
    /// Random product joints for the exhaustive predictor check.
    pub predictor_cases: usize,
}

impl Default for SelfTestConfig {
    fn default() -> Self {
        Self { seed: 0, cases: 1000, predictor_cases: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Random weights with occasional exact zeros.
fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> =
            (0..n).map(|_| if rng.random_bool(0.15) { 0.0 } else { -rng.random::<f64>().max(1e-300).ln() }).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|x| x / total).collect();
        }
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> FiniteDistribution<u32> {
    FiniteDistribution::new((0..n as u32).collect(), random_masses(rng, n)).expect("normalized")
}

pub fn random_joint(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> JointRun<u32, u32> {
    JointRun::new((0..rows as u32).collect(), (0..cols as u32).collect(), random_masses(rng, rows * cols))
        .expect("normalized")
}

pub fn random_product(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> JointRun<u32, u32> {
    JointRun::product(&random_distribution(rng, rows), &random_distribution(rng, cols))
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64, worst: f64) -> Self {
        Self { name, tolerance, cases: 0, violations: 0, worst }
    }

    fn done(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            cases: self.cases,
            violations: self.violations,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

pub fn run(cfg: &SelfTestConfig) -> Vec<CheckOutcome> {
    let mut rng = stream(cfg.seed, crate::rng::purpose::INIT);
    let mut gibbs = Tally::new("kl_nonnegative", 1e-12, f64::INFINITY);
    let mut ident = Tally::new("mi_entropy_identity", 1e-9, 0.0);
    let mut product = Tally::new("product_zero_leakage", 1e-9, 0.0);
    let mut symmetry = Tally::new("mi_swap_symmetry", 1e-12, 0.0);
    for _ in 0..cfg.cases {
        let n = rng.random_range(1..=8);
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let d = kl_divergence(&p, &q).expect("same universe");
        gibbs.cases += 1;
        gibbs.worst = gibbs.worst.min(d);
        if d < -gibbs.tolerance {
            gibbs.violations += 1;
        }

        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let j = random_joint(&mut rng, r, c);
        let mi = mutual_info(&j);
        let e = (mi - entropy_identity(&j)).abs();
        ident.cases += 1;
        ident.worst = ident.worst.max(e);
        if e > ident.tolerance {
            ident.violations += 1;
        }
        let s = (mi - mutual_info(&j.swap())).abs();
        symmetry.cases += 1;
        symmetry.worst = symmetry.worst.max(s);
        if s > symmetry.tolerance {
            symmetry.violations += 1;
        }

        let pj = random_product(&mut rng, r, c);
        let l = mutual_info(&pj);
        product.cases += 1;
        product.worst = product.worst.max(l);
        if l > product.tolerance {
            product.violations += 1;
        }
    }

    let mut exhaustive = Tally::new("product_predictors_at_baseline", 1e-9, f64::NEG_INFINITY);
    for _ in 0..cfg.predictor_cases {
        let (r, c) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let pj = random_product(&mut rng, r, c);
        let base = max_mass(&pj.right_marginal());
        for g in enumerate_predictors(pj.left(), pj.right()) {
            let excess = predictor_accuracy(&pj, &g).expect("total predictor") - base;
            exhaustive.cases += 1;
            exhaustive.worst = exhaustive.worst.max(excess);
            if excess > exhaustive.tolerance {
                exhaustive.violations += 1;
            }
        }
    }

    let mut correlated = Tally::new("correlated_runs_detected", 0.0, f64::INFINITY);
    for flip in [0.0, 0.1, 0.25, 0.4] {
        let q = (1.0 - flip) / 2.0;
        let j = JointRun::new(vec![0u32, 1], vec![0u32, 1], vec![q, flip / 2.0, flip / 2.0, q]).expect("valid");
        let adv = predictor_accuracy(&j, &map_predictor(&j)).expect("total") - max_mass(&j.right_marginal());
        correlated.cases += 1;
        correlated.worst = correlated.worst.min(adv);
        if adv <= 0.0 || is_independent(&j, 1e-9).expect("positive tol") {
            correlated.violations += 1;
        }
    }

    vec![gibbs.done(), ident.done(), symmetry.done(), product.done(), exhaustive.done(), correlated.done()]
}

/// Reference entropy of a two-point distribution, for closed-form checks.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&FiniteDistribution::new(vec![0u8, 1], vec![p, 1.0 - p]).expect("valid"))
}
