use std::collections::HashMap;

use super::{FiniteDistribution, InfoError, JointRun, Label, Result};

/// Stochastic channel `x -> P(. | x)` with a shared output alphabet.
#[derive(Debug, Clone)]
pub struct ConditionalKernel<X: Label, Y: Label> {
    inputs: Vec<X>,
    outputs: Vec<Y>,
    rows: Vec<Vec<f64>>,
    index: HashMap<X, usize>,
}

impl<X: Label, Y: Label> ConditionalKernel<X, Y> {
    /// Every row must be a distribution over `outputs`.
    pub fn new(inputs: Vec<X>, outputs: Vec<Y>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != inputs.len() {
            return Err(InfoError::LengthMismatch { outcomes: inputs.len(), masses: rows.len() });
        }
        for row in &rows {
            FiniteDistribution::new(outputs.clone(), row.clone())?;
        }
        let mut index = HashMap::new();
        for (i, x) in inputs.iter().enumerate() {
            if index.insert(x.clone(), i).is_some() {
                return Err(InfoError::DuplicateOutcome(i));
            }
        }
        Ok(Self { inputs, outputs, rows, index })
    }

    pub fn inputs(&self) -> &[X] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Y] {
        &self.outputs
    }

    pub fn row(&self, x: &X) -> Option<FiniteDistribution<Y>> {
        let i = *self.index.get(x)?;
        Some(FiniteDistribution::new(self.outputs.clone(), self.rows[i].clone()).expect("validated row"))
    }

    /// Joint run obtained by feeding `input` through the channel.
    pub fn joint(&self, input: &FiniteDistribution<X>) -> Result<JointRun<X, Y>> {
        let mut mass = Vec::with_capacity(input.len() * self.outputs.len());
        for (x, px) in input.iter() {
            let i = *self.index.get(x).ok_or(InfoError::OutsideUniverse)?;
            mass.extend(self.rows[i].iter().map(|q| px * q));
        }
        JointRun::new(input.outcomes().to_vec(), self.outputs.clone(), mass)
    }
}
