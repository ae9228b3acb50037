use std::collections::HashMap;

use super::{max_mass, InfoError, JointRun, Label, Result};

/// A guess `g: X -> Y` of the observable from the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor<X: Label, Y: Label> {
    map: HashMap<X, Y>,
}

impl<X: Label, Y: Label> Predictor<X, Y> {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (X, Y)>) -> Self {
        Self { map: pairs.into_iter().collect() }
    }

    pub fn from_fn(domain: &[X], f: impl Fn(&X) -> Y) -> Self {
        Self::from_pairs(domain.iter().map(|x| (x.clone(), f(x))))
    }

    pub fn constant(domain: &[X], y: Y) -> Self {
        Self::from_fn(domain, |_| y.clone())
    }

    pub fn predict(&self, x: &X) -> Option<&Y> {
        self.map.get(x)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<X: Label> Predictor<X, X> {
    pub fn identity(domain: &[X]) -> Self {
        Self::from_fn(domain, |x| x.clone())
    }
}

/// `P(g(X) = Y)`. Fails when `g` is undefined on a state with positive mass.
pub fn predictor_accuracy<X: Label, Y: Label>(p: &JointRun<X, Y>, g: &Predictor<X, Y>) -> Result<f64> {
    let rows = p.row_sums();
    let mut acc = 0.0;
    for (i, x) in p.left().iter().enumerate() {
        if rows[i] <= 0.0 {
            continue;
        }
        let y = g.predict(x).ok_or(InfoError::PartialPredictor)?;
        acc += p.right_pos(y).map_or(0.0, |j| p.cell(i, j));
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Evidence that a run is not independent: a predictor beating the best
/// constant guess, plus a joint cell far from the product of marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct NonIndependenceCertificate<X, Y> {
    pub accuracy: f64,
    /// `max_mass` of the right marginal.
    pub baseline: f64,
    /// `accuracy - baseline`, strictly positive.
    pub gap: f64,
    pub cell: (X, Y),
    /// `P(cell) - P_X(x) P_Y(y)` at the reported cell.
    pub cell_gap: f64,
    /// `gap / |support(P_X)|`; always `cell_gap >= bound`.
    pub bound: f64,
}

/// Gaps at or below this are treated as floating-point noise.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// Certificate for `g` when it beats the max-mass baseline, otherwise `None`.
///
/// Summing `P(x, g(x)) - P_X(x) P_Y(g(x))` over the left support gives at
/// least `gap`, so the largest summand is at least `gap / |support|`.
pub fn nonindependence_certificate<X: Label, Y: Label>(
    p: &JointRun<X, Y>,
    g: &Predictor<X, Y>,
) -> Result<Option<NonIndependenceCertificate<X, Y>>> {
    let accuracy = predictor_accuracy(p, g)?;
    let cols = p.column_sums();
    let baseline = cols.iter().copied().fold(0.0, f64::max);
    let gap = accuracy - baseline;
    if gap <= ROUNDING_SLACK {
        return Ok(None);
    }
    let rows = p.row_sums();
    let mut support = 0usize;
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, x) in p.left().iter().enumerate() {
        if rows[i] <= 0.0 {
            continue;
        }
        support += 1;
        let y = g.predict(x).expect("checked by predictor_accuracy");
        let (j, excess) = match p.right_pos(y) {
            Some(j) => (j, p.cell(i, j) - rows[i] * cols[j]),
            None => continue,
        };
        if best.is_none_or(|(_, _, b)| excess > b) {
            best = Some((i, j, excess));
        }
    }
    let (i, j, cell_gap) = best.expect("positive gap implies a contributing cell");
    Ok(Some(NonIndependenceCertificate {
        accuracy,
        baseline,
        gap,
        cell: (p.left()[i].clone(), p.right()[j].clone()),
        cell_gap,
        bound: gap / support as f64,
    }))
}

/// Per-row argmax readout. Rows with zero mass fall back to the right
/// marginal's mode; ties go to the earlier right label.
pub fn map_predictor<X: Label, Y: Label>(p: &JointRun<X, Y>) -> Predictor<X, Y> {
    let c = p.right().len();
    let mode = argmax(&p.column_sums());
    let pairs = p.left().iter().enumerate().map(|(i, x)| {
        let row = &p.table()[i * c..(i + 1) * c];
        let j = if row.iter().all(|&m| m <= 0.0) { mode } else { argmax(row) };
        (x.clone(), p.right()[j].clone())
    });
    Predictor::from_pairs(pairs)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// All `|Y|^|X|` total predictors, in lexicographic order.
pub fn enumerate_predictors<X: Label, Y: Label>(left: &[X], right: &[Y]) -> Vec<Predictor<X, Y>> {
    let total = right.len().checked_pow(left.len() as u32).expect("predictor space too large");
    (0..total)
        .map(|mut code| {
            Predictor::from_pairs(left.iter().map(|x| {
                let y = right[code % right.len()].clone();
                code /= right.len();
                (x.clone(), y)
            }))
        })
        .collect()
}

/// Accuracy of the best constant predictor under `p`'s right marginal.
pub fn baseline<X: Label, Y: Label>(p: &JointRun<X, Y>) -> f64 {
    max_mass(&p.right_marginal())
}

#[cfg(test)]
mod tests {
    use super::super::joint::fixtures::*;
    use super::*;

    #[test]
    fn accuracy_examples() {
        let p = correlated_bit();
        assert_eq!(predictor_accuracy(&p, &Predictor::identity(&[0, 1])).unwrap(), 1.0);
        let q = product_5_37();
        let c = predictor_accuracy(&q, &Predictor::constant(&[0, 1], 1)).unwrap();
        assert!((c - 0.7).abs() < 1e-15);
        let best = enumerate_predictors(&[0u8, 1], &[0u8, 1])
            .iter()
            .map(|g| predictor_accuracy(&flip(0.25), g).unwrap())
            .fold(0.0, f64::max);
        assert!((best - 0.75).abs() < 1e-15);
    }

    #[test]
    fn partial_predictor_rejected() {
        let g = Predictor::from_pairs([(0u8, 0u8)]);
        assert_eq!(predictor_accuracy(&correlated_bit(), &g).unwrap_err(), InfoError::PartialPredictor);
        // Undefined only on a zero-mass row is fine.
        let p = JointRun::new(vec![0u8, 1], vec![0u8], vec![1.0, 0.0]).unwrap();
        assert_eq!(predictor_accuracy(&p, &g).unwrap(), 1.0);
    }

    #[test]
    fn certificate_examples() {
        let c = nonindependence_certificate(&correlated_bit(), &Predictor::identity(&[0, 1])).unwrap().unwrap();
        assert_eq!((c.accuracy, c.baseline, c.gap), (1.0, 0.5, 0.5));
        assert!(c.cell_gap >= c.bound);
        let c = nonindependence_certificate(&flip(0.25), &Predictor::identity(&[0, 1])).unwrap().unwrap();
        assert!((c.gap - 0.25).abs() < 1e-15);
        assert_eq!(c.cell, (0, 0));
        assert!((c.cell_gap - 0.125).abs() < 1e-15 && c.cell_gap >= c.bound);
        let q = product_5_37();
        for g in enumerate_predictors(&[0u8, 1], &[0u8, 1]) {
            assert!(nonindependence_certificate(&q, &g).unwrap().is_none());
        }
    }

    #[test]
    fn map_predictor_examples() {
        assert_eq!(map_predictor(&correlated_bit()), Predictor::identity(&[0, 1]));
        assert_eq!(map_predictor(&product_5_37()), Predictor::constant(&[0, 1], 1));
        assert_eq!(map_predictor(&flip(0.25)), Predictor::identity(&[0, 1]));
        let tie = JointRun::new(vec![0u8], vec!['a', 'b'], vec![0.5, 0.5]).unwrap();
        assert_eq!(map_predictor(&tie).predict(&0), Some(&'a'));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_predictors(&[0u8, 1, 2, 3], &[0u8, 1, 2]).len(), 81);
        let all = enumerate_predictors(&[0u8, 1], &['a', 'b']);
        assert_eq!(all[1].predict(&0), Some(&'b'));
        assert_eq!(all[1].predict(&1), Some(&'a'));
    }
}
