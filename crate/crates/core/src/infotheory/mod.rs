//! Finite-distribution information theory.
//!
//! Everything is measured in bits. A [`FiniteDistribution`] is an explicit
//! outcome-to-mass table; a [`JointRun`] is a distribution over pairs
//! (internal state, observable). Leakage of a run is its mutual
//! information, and a run is independent when it equals the product of its
//! marginals.
//!
//! The two facts the rest of the crate leans on:
//!
//! - an independent run has zero leakage, and
//! - if any predictor `g: X -> Y` is more accurate than the best constant
//!   guess ([`max_mass`] of the right marginal), the run is not
//!   independent. [`nonindependence_certificate`] turns such a predictor
//!   into an explicit witness cell.

mod channel;
mod joint;
mod predict;
pub mod selftest;
mod text;

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

pub use channel::ConditionalKernel;
pub use joint::{
    entropy_identity, is_independent, leakage, marginals, max_product_gap, mutual_info, product_of_marginals, JointRun,
};
pub use predict::{
    baseline, enumerate_predictors, map_predictor, nonindependence_certificate, predictor_accuracy,
    NonIndependenceCertificate, Predictor, ROUNDING_SLACK,
};
pub use text::{parse_distribution, write_distribution};

/// Entrywise tolerance for distribution equality and normalization.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Bound on labels usable as outcomes.
pub trait Label: Clone + Eq + Hash {}
impl<T: Clone + Eq + Hash> Label for T {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("distribution has no outcomes")]
    Empty,
    #[error("{outcomes} outcomes but {masses} masses")]
    LengthMismatch { outcomes: usize, masses: usize },
    #[error("mass {value} at index {index} is negative or not finite")]
    BadMass { index: usize, value: f64 },
    #[error("masses sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("duplicate outcome at index {0}")]
    DuplicateOutcome(usize),
    #[error("distributions are over different outcome sets")]
    UniverseMismatch,
    #[error("sample outside the declared outcome set")]
    OutsideUniverse,
    #[error("predictor undefined on a left outcome with positive mass")]
    PartialPredictor,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("label cannot be written: {0:?}")]
    BadLabel(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, InfoError>;

/// Explicit outcome-to-mass table. Outcome order is significant: it is the
/// tie-break order for argmax-style queries.
#[derive(Debug, Clone)]
pub struct FiniteDistribution<L: Label> {
    outcomes: Vec<L>,
    masses: Vec<f64>,
    index: HashMap<L, usize>,
}

impl<L: Label> PartialEq for FiniteDistribution<L> {
    fn eq(&self, other: &Self) -> bool {
        self.outcomes == other.outcomes && self.masses == other.masses
    }
}

impl<L: Label> FiniteDistribution<L> {
    pub fn new(outcomes: Vec<L>, masses: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(InfoError::Empty);
        }
        if outcomes.len() != masses.len() {
            return Err(InfoError::LengthMismatch { outcomes: outcomes.len(), masses: masses.len() });
        }
        for (index, &value) in masses.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(InfoError::BadMass { index, value });
            }
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(InfoError::NotNormalized { sum });
        }
        let mut index = HashMap::with_capacity(outcomes.len());
        for (i, o) in outcomes.iter().enumerate() {
            if index.insert(o.clone(), i).is_some() {
                return Err(InfoError::DuplicateOutcome(i));
            }
        }
        Ok(Self { outcomes, masses, index })
    }

    /// Normalizes non-negative weights (counts, histogram heights).
    pub fn from_weights(outcomes: Vec<L>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(InfoError::NotNormalized { sum: total });
        }
        Self::new(outcomes, weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(outcomes: Vec<L>) -> Result<Self> {
        let n = outcomes.len();
        Self::new(outcomes, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn point(outcome: L) -> Self {
        Self::new(vec![outcome], vec![1.0]).expect("point mass is valid")
    }

    pub fn outcomes(&self) -> &[L] {
        &self.outcomes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn index_of(&self, outcome: &L) -> Option<usize> {
        self.index.get(outcome).copied()
    }

    /// Mass of `outcome`; zero for outcomes outside the table.
    pub fn mass(&self, outcome: &L) -> f64 {
        self.index_of(outcome).map_or(0.0, |i| self.masses[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.outcomes.iter().zip(self.masses.iter().copied())
    }

    /// Outcomes with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = &L> {
        self.iter().filter(|(_, m)| *m > 0.0).map(|(o, _)| o)
    }

    fn same_universe(&self, other: &Self) -> bool {
        self.len() == other.len() && self.outcomes.iter().all(|o| other.index.contains_key(o))
    }
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy<L: Label>(p: &FiniteDistribution<L>) -> f64 {
    let h: f64 = p.masses.iter().filter(|&&m| m > 0.0).map(|&m| -m * m.log2()).sum();
    h.max(0.0)
}

/// `D(P || Q)` in bits. Returns `f64::INFINITY` when `P` puts mass on an
/// outcome where `Q` has none.
pub fn kl_divergence<L: Label>(p: &FiniteDistribution<L>, q: &FiniteDistribution<L>) -> Result<f64> {
    if !p.same_universe(q) {
        return Err(InfoError::UniverseMismatch);
    }
    let mut d = 0.0;
    for (o, pm) in p.iter() {
        if pm <= 0.0 {
            continue;
        }
        let qm = q.mass(o);
        if qm <= 0.0 {
            return Ok(f64::INFINITY);
        }
        d += pm * (pm / qm).log2();
    }
    Ok(d)
}

/// Largest single-outcome mass: the accuracy of the best constant guess.
pub fn max_mass<L: Label>(p: &FiniteDistribution<L>) -> f64 {
    p.masses.iter().copied().fold(0.0, f64::max)
}

/// Half the L1 distance between two distributions over the same outcomes.
pub fn total_variation<L: Label>(p: &FiniteDistribution<L>, q: &FiniteDistribution<L>) -> Result<f64> {
    if !p.same_universe(q) {
        return Err(InfoError::UniverseMismatch);
    }
    Ok(0.5 * p.iter().map(|(o, m)| (m - q.mass(o)).abs()).sum::<f64>())
}

/// An outcome on which two distributions measurably differ.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<L> {
    pub outcome: L,
    /// `|P1(outcome) - P2(outcome)|`.
    pub gap: f64,
    pub first_mass: f64,
    pub second_mass: f64,
}

/// The outcome maximizing `|P1(o) - P2(o)|`, if that maximum exceeds `tol`.
/// Ties go to the earlier outcome in `p1`'s order.
pub fn distinguishability_witness<L: Label>(
    p1: &FiniteDistribution<L>,
    p2: &FiniteDistribution<L>,
    tol: f64,
) -> Result<Option<Witness<L>>> {
    if !p1.same_universe(p2) {
        return Err(InfoError::UniverseMismatch);
    }
    let mut best: Option<Witness<L>> = None;
    for (o, m1) in p1.iter() {
        let m2 = p2.mass(o);
        let gap = (m1 - m2).abs();
        if best.as_ref().is_none_or(|b| gap > b.gap) {
            best = Some(Witness { outcome: o.clone(), gap, first_mass: m1, second_mass: m2 });
        }
    }
    Ok(best.filter(|w| w.gap > tol))
}

/// Empirical distribution of samples; outcomes in order of first appearance.
pub fn empirical_distribution<L: Label>(samples: &[L]) -> Result<FiniteDistribution<L>> {
    if samples.is_empty() {
        return Err(InfoError::Empty);
    }
    let mut outcomes = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut index: HashMap<&L, usize> = HashMap::new();
    for s in samples {
        let i = *index.entry(s).or_insert_with(|| {
            outcomes.push(s.clone());
            counts.push(0.0);
            outcomes.len() - 1
        });
        counts[i] += 1.0;
    }
    FiniteDistribution::from_weights(outcomes, &counts)
}

/// Empirical distribution over a declared universe, keeping zero-mass
/// outcomes so that results are comparable across sample sets.
pub fn empirical_over<L: Label>(universe: &[L], samples: &[L]) -> Result<FiniteDistribution<L>> {
    if samples.is_empty() {
        return Err(InfoError::Empty);
    }
    let index: HashMap<&L, usize> = universe.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let mut counts = vec![0.0; universe.len()];
    for s in samples {
        let i = index.get(s).ok_or(InfoError::OutsideUniverse)?;
        counts[*i] += 1.0;
    }
    FiniteDistribution::from_weights(universe.to_vec(), &counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(masses: &[f64]) -> FiniteDistribution<u32> {
        FiniteDistribution::new((0..masses.len() as u32).collect(), masses.to_vec()).unwrap()
    }

    #[test]
    fn rejects_invalid_tables() {
        assert_eq!(FiniteDistribution::<u8>::new(vec![], vec![]).unwrap_err(), InfoError::Empty);
        assert!(matches!(FiniteDistribution::new(vec![0, 1], vec![0.5, 0.6]), Err(InfoError::NotNormalized { .. })));
        assert!(matches!(
            FiniteDistribution::new(vec![0, 1], vec![1.5, -0.5]),
            Err(InfoError::BadMass { index: 1, .. })
        ));
        assert_eq!(FiniteDistribution::new(vec![3, 3], vec![0.5, 0.5]).unwrap_err(), InfoError::DuplicateOutcome(1));
        assert!(matches!(FiniteDistribution::new(vec![0], vec![0.5, 0.5]), Err(InfoError::LengthMismatch { .. })));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&FiniteDistribution::point("x")), 0.0);
        assert!((entropy(&bits(&[0.5, 0.5])) - 1.0).abs() < 1e-15);
        // Closed form evaluated independently of the summation loop.
        let expected = -(0.75f64 * 0.75f64.log2()) - 0.25 * 0.25f64.log2();
        assert!((entropy(&bits(&[0.75, 0.25])) - expected).abs() < 1e-15);
        assert!((expected - 0.811_278_124_459_132_8).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = bits(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!((kl_divergence(&bits(&[1.0, 0.0]), &bits(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kl_divergence(&bits(&[0.5, 0.5]), &bits(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        assert_eq!(
            kl_divergence(&bits(&[0.5, 0.5]), &bits(&[0.2, 0.3, 0.5])).unwrap_err(),
            InfoError::UniverseMismatch
        );
    }

    #[test]
    fn kl_matches_outcomes_by_label_not_position() {
        let p = FiniteDistribution::new(vec!['a', 'b'], vec![0.9, 0.1]).unwrap();
        let q = FiniteDistribution::new(vec!['b', 'a'], vec![0.1, 0.9]).unwrap();
        assert_eq!(kl_divergence(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn max_mass_examples() {
        assert_eq!(max_mass(&bits(&[0.25; 4])), 0.25);
        assert_eq!(max_mass(&bits(&[0.7, 0.3])), 0.7);
    }

    #[test]
    fn witness_examples() {
        let p = bits(&[0.6, 0.4]);
        assert_eq!(distinguishability_witness(&p, &p, 1e-12).unwrap(), None);
        let w = distinguishability_witness(&bits(&[1.0, 0.0]), &bits(&[0.0, 1.0]), 0.5).unwrap().unwrap();
        assert_eq!((w.outcome, w.gap), (0, 1.0));
        let w = distinguishability_witness(&p, &bits(&[0.5, 0.5]), 0.05).unwrap().unwrap();
        assert_eq!(w.outcome, 0);
        assert!((w.gap - 0.1).abs() < 1e-12);
        assert_eq!(distinguishability_witness(&p, &bits(&[0.5, 0.5]), 0.2).unwrap(), None);
    }

    #[test]
    fn empirical_examples() {
        let d = empirical_distribution(&["a", "a", "b", "b"]).unwrap();
        assert_eq!(d.masses(), &[0.5, 0.5]);
        let d = empirical_distribution(&["a"]).unwrap();
        assert_eq!(d, FiniteDistribution::point("a"));
        let d = empirical_distribution(&["a", "a", "a", "b"]).unwrap();
        assert_eq!((d.outcomes(), d.masses()), (&["a", "b"][..], &[0.75, 0.25][..]));
        assert_eq!(empirical_distribution::<u8>(&[]).unwrap_err(), InfoError::Empty);
    }

    #[test]
    fn empirical_over_keeps_zero_bins() {
        let d = empirical_over(&[0u8, 1, 2], &[2, 2]).unwrap();
        assert_eq!(d.masses(), &[0.0, 0.0, 1.0]);
        assert_eq!(empirical_over(&[0u8, 1], &[5]).unwrap_err(), InfoError::OutsideUniverse);
    }

    #[test]
    fn total_variation_is_symmetric() {
        let p = bits(&[0.6, 0.3, 0.1]);
        let q = bits(&[0.2, 0.3, 0.5]);
        let a = total_variation(&p, &q).unwrap();
        assert!((a - 0.4).abs() < 1e-12);
        assert_eq!(a, total_variation(&q, &p).unwrap());
    }
}
