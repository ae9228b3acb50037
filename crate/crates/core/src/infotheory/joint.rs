use std::collections::HashMap;

use super::{entropy, FiniteDistribution, InfoError, Label, Result, MASS_TOLERANCE};

/// Joint distribution over (state, observable) pairs, stored densely as a
/// `left.len() x right.len()` row-major table.
#[derive(Debug, Clone)]
pub struct JointRun<X: Label, Y: Label> {
    left: Vec<X>,
    right: Vec<Y>,
    mass: Vec<f64>,
    left_index: HashMap<X, usize>,
    right_index: HashMap<Y, usize>,
}

impl<X: Label, Y: Label> PartialEq for JointRun<X, Y> {
    fn eq(&self, other: &Self) -> bool {
        self.left == other.left && self.right == other.right && self.mass == other.mass
    }
}

fn index_labels<L: Label>(labels: &[L]) -> Result<HashMap<L, usize>> {
    let mut index = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if index.insert(l.clone(), i).is_some() {
            return Err(InfoError::DuplicateOutcome(i));
        }
    }
    Ok(index)
}

impl<X: Label, Y: Label> JointRun<X, Y> {
    /// `mass[i * right.len() + j]` is the mass of `(left[i], right[j])`.
    pub fn new(left: Vec<X>, right: Vec<Y>, mass: Vec<f64>) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(InfoError::Empty);
        }
        let cells = left.len() * right.len();
        if mass.len() != cells {
            return Err(InfoError::LengthMismatch { outcomes: cells, masses: mass.len() });
        }
        for (index, &value) in mass.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(InfoError::BadMass { index, value });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(InfoError::NotNormalized { sum });
        }
        let left_index = index_labels(&left)?;
        let right_index = index_labels(&right)?;
        Ok(Self { left, right, mass, left_index, right_index })
    }

    /// Joint from nonnegative weights (e.g. co-occurrence counts).
    pub fn from_weights(left: Vec<X>, right: Vec<Y>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(InfoError::NotNormalized { sum: total });
        }
        Self::new(left, right, weights.iter().map(|w| w / total).collect())
    }

    /// Independent coupling `px ⊗ py`.
    pub fn product(px: &FiniteDistribution<X>, py: &FiniteDistribution<Y>) -> Self {
        let mass = px.masses().iter().flat_map(|a| py.masses().iter().map(move |b| a * b)).collect();
        Self::new(px.outcomes().to_vec(), py.outcomes().to_vec(), mass)
            .expect("product of valid distributions is valid")
    }

    /// Regroups a distribution over pairs. Labels are ordered by first
    /// appearance; cells absent from `p` get zero mass.
    pub fn from_pairs(p: &FiniteDistribution<(X, Y)>) -> Self {
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut li: HashMap<X, usize> = HashMap::new();
        let mut ri: HashMap<Y, usize> = HashMap::new();
        for (x, y) in p.outcomes() {
            if !li.contains_key(x) {
                li.insert(x.clone(), left.len());
                left.push(x.clone());
            }
            if !ri.contains_key(y) {
                ri.insert(y.clone(), right.len());
                right.push(y.clone());
            }
        }
        let mut mass = vec![0.0; left.len() * right.len()];
        for ((x, y), m) in p.iter() {
            mass[li[x] * right.len() + ri[y]] += m;
        }
        Self::new(left, right, mass).expect("regrouping preserves validity")
    }

    /// Empirical joint of `(x, y)` samples over declared label sets.
    pub fn empirical(left: Vec<X>, right: Vec<Y>, samples: &[(X, Y)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(InfoError::Empty);
        }
        let li = index_labels(&left)?;
        let ri = index_labels(&right)?;
        let mut counts = vec![0.0; left.len() * right.len()];
        for (x, y) in samples {
            let i = li.get(x).ok_or(InfoError::OutsideUniverse)?;
            let j = ri.get(y).ok_or(InfoError::OutsideUniverse)?;
            counts[i * right.len() + j] += 1.0;
        }
        Self::from_weights(left, right, &counts)
    }

    pub fn left(&self) -> &[X] {
        &self.left
    }

    pub fn right(&self) -> &[Y] {
        &self.right
    }

    /// Row-major mass table.
    pub fn table(&self) -> &[f64] {
        &self.mass
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.right.len() + j]
    }

    pub fn mass(&self, x: &X, y: &Y) -> f64 {
        match (self.left_index.get(x), self.right_index.get(y)) {
            (Some(&i), Some(&j)) => self.cell(i, j),
            _ => 0.0,
        }
    }

    pub(crate) fn right_pos(&self, y: &Y) -> Option<usize> {
        self.right_index.get(y).copied()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.chunks(self.right.len()).map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.right.len()];
        for row in self.mass.chunks(self.right.len()) {
            for (c, m) in cols.iter_mut().zip(row) {
                *c += m;
            }
        }
        cols
    }

    pub fn left_marginal(&self) -> FiniteDistribution<X> {
        FiniteDistribution::new(self.left.clone(), self.row_sums()).expect("row sums form a distribution")
    }

    pub fn right_marginal(&self) -> FiniteDistribution<Y> {
        FiniteDistribution::new(self.right.clone(), self.column_sums()).expect("column sums form a distribution")
    }

    /// Same run with coordinates exchanged.
    pub fn swap(&self) -> JointRun<Y, X> {
        let (r, c) = (self.left.len(), self.right.len());
        let mut mass = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                mass[j * r + i] = self.mass[i * c + j];
            }
        }
        JointRun::new(self.right.clone(), self.left.clone(), mass).expect("transpose preserves validity")
    }

    pub fn to_pairs(&self) -> FiniteDistribution<(X, Y)> {
        let pairs = self.left.iter().flat_map(|x| self.right.iter().map(move |y| (x.clone(), y.clone()))).collect();
        FiniteDistribution::new(pairs, self.mass.clone()).expect("joint table is a distribution")
    }

    pub fn joint_entropy(&self) -> f64 {
        let h: f64 = self.mass.iter().filter(|&&m| m > 0.0).map(|&m| -m * m.log2()).sum();
        h.max(0.0)
    }
}

pub fn marginals<X: Label, Y: Label>(p: &JointRun<X, Y>) -> (FiniteDistribution<X>, FiniteDistribution<Y>) {
    (p.left_marginal(), p.right_marginal())
}

pub fn product_of_marginals<X: Label, Y: Label>(p: &JointRun<X, Y>) -> JointRun<X, Y> {
    let (px, py) = marginals(p);
    JointRun::product(&px, &py)
}

/// `I(X;Y) = D(P || P_X ⊗ P_Y)` in bits.
pub fn mutual_info<X: Label, Y: Label>(p: &JointRun<X, Y>) -> f64 {
    let rows = p.row_sums();
    let cols = p.column_sums();
    let c = cols.len();
    let mut total = 0.0;
    for (k, &m) in p.table().iter().enumerate() {
        if m > 0.0 {
            total += m * (m / (rows[k / c] * cols[k % c])).log2();
        }
    }
    total.max(0.0)
}

/// Leakage of a run: the mutual information between state and observable.
pub fn leakage<X: Label, Y: Label>(p: &JointRun<X, Y>) -> f64 {
    mutual_info(p)
}

/// Largest entrywise gap `|P(x,y) - P_X(x) P_Y(y)|`.
pub fn max_product_gap<X: Label, Y: Label>(p: &JointRun<X, Y>) -> f64 {
    let rows = p.row_sums();
    let cols = p.column_sums();
    let c = cols.len();
    p.table().iter().enumerate().map(|(k, &m)| (m - rows[k / c] * cols[k % c]).abs()).fold(0.0, f64::max)
}

pub fn is_independent<X: Label, Y: Label>(p: &JointRun<X, Y>, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(InfoError::BadTolerance(tol));
    }
    Ok(max_product_gap(p) <= tol)
}

/// `H(X) + H(Y) - H(X,Y)`, the entropy form of mutual information.
pub fn entropy_identity<X: Label, Y: Label>(p: &JointRun<X, Y>) -> f64 {
    let (px, py) = marginals(p);
    entropy(&px) + entropy(&py) - p.joint_entropy()
}
