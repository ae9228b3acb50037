//! Ridge-regression readout.

use nalgebra::{DMatrix, DVector};

use super::ReservoirError;

/// Row-major design matrix; one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ReservoirError> {
        if cols == 0 || data.len() != rows * cols {
            return Err(ReservoirError::Invalid("feature matrix shape does not match its data"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(ReservoirError::Invalid("feature matrix has non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ReservoirError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(ReservoirError::Invalid("ragged feature rows"));
        }
        Self::new(rows.len(), cols, rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    pub w: Vec<f64>,
}

impl ReadoutWeights {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.w.iter().zip(row).map(|(w, x)| w * x).sum()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn normal_equations(x: &FeatureMatrix, y: &[f64], lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let m = x.matrix();
    let mut gram = m.transpose() * &m;
    for i in 0..x.cols() {
        gram[(i, i)] += lambda;
    }
    let rhs = m.transpose() * DVector::from_column_slice(y);
    (gram, rhs)
}

/// Solves `(XᵀX + λI) w = Xᵀy`.
pub fn ridge_fit(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<ReadoutWeights, ReservoirError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ReservoirError::Invalid("ridge lambda must be positive and finite"));
    }
    if x.rows() < x.cols() {
        return Err(ReservoirError::Invalid("need at least as many rows as columns"));
    }
    if y.len() != x.rows() {
        return Err(ReservoirError::Invalid("target length does not match row count"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ReservoirError::Invalid("targets must be finite"));
    }
    let (gram, rhs) = normal_equations(x, y, lambda);
    let chol = gram.clone().cholesky().ok_or(ReservoirError::Invalid("normal equations are not positive definite"))?;
    let mut w = chol.solve(&rhs);
    // One step of iterative refinement.
    let r = &rhs - &gram * &w;
    w += chol.solve(&r);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(ReservoirError::Invalid("ridge solution is not finite"));
    }
    Ok(ReadoutWeights { w: w.iter().copied().collect() })
}

/// `|(XᵀX + λI) w − Xᵀy| / |Xᵀy|`.
pub fn normal_equation_residual(x: &FeatureMatrix, y: &[f64], w: &ReadoutWeights, lambda: f64) -> f64 {
    let (gram, rhs) = normal_equations(x, y, lambda);
    let r = &gram * DVector::from_column_slice(&w.w) - &rhs;
    let scale = rhs.norm();
    if scale > 0.0 {
        r.norm() / scale
    } else {
        r.norm()
    }
}
