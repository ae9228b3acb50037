//! NARMA-10 through the twin: each input symbol drives one job, and a ridge
//! readout over the timing history predicts the next target.

use std::fmt;
use std::str::FromStr;

use super::metrics::nrmse;
use super::narma::{NarmaSeries, INPUT_MAX};
use super::ridge::{ridge_fit, FeatureMatrix};
use super::ReservoirError;
use crate::sha_twin::{Job, Twin};
use crate::swh::{run_session, session_jobs, session_template, ChannelConfig, HandshakeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NarmaMode {
    /// One blocking handshake per input symbol.
    Dialogue,
    /// Pipelined batches; timing is measured from batch dispatch.
    Monologue,
    /// Predicts the mean of the evaluation targets.
    Constant,
}

impl NarmaMode {
    pub const ALL: [NarmaMode; 3] = [NarmaMode::Dialogue, NarmaMode::Monologue, NarmaMode::Constant];
}

impl fmt::Display for NarmaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NarmaMode::Dialogue => "dialogue",
            NarmaMode::Monologue => "monologue",
            NarmaMode::Constant => "constant",
        })
    }
}

impl FromStr for NarmaMode {
    type Err = ReservoirError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dialogue" => Ok(NarmaMode::Dialogue),
            "monologue" => Ok(NarmaMode::Monologue),
            "constant" => Ok(NarmaMode::Constant),
            _ => Err(ReservoirError::Invalid("mode must be dialogue, monologue or constant")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarmaConfig {
    pub difficulty: f64,
    pub monologue_depth: usize,
    /// Leading fraction of scored rows used for training.
    pub train_fraction: f64,
    pub lambda: f64,
    /// Number of past timings in each feature row.
    pub history: usize,
}

impl Default for NarmaConfig {
    fn default() -> Self {
        Self { difficulty: 256.0, monologue_depth: 4, train_fraction: 0.7, lambda: 1e-6, history: 10 }
    }
}

impl NarmaConfig {
    pub fn validate(&self) -> Result<(), ReservoirError> {
        if self.monologue_depth < 2 {
            return Err(ReservoirError::Invalid("monologue depth must be at least 2"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ReservoirError::Invalid("train fraction must lie in (0, 1)"));
        }
        if self.history == 0 {
            return Err(ReservoirError::Invalid("history must be at least 1"));
        }
        if !(self.lambda > 0.0) {
            return Err(ReservoirError::Invalid("ridge lambda must be positive"));
        }
        Ok(())
    }
}

/// Low-jitter lossless link: 500 us one way, 1 us jitter.
pub fn narma_channel() -> ChannelConfig {
    ChannelConfig { one_way_latency_mean_ns: 500_000.0, latency_jitter_sigma_ns: 1_000.0, ..ChannelConfig::ideal() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarmaResult {
    pub mode: NarmaMode,
    pub nrmse: f64,
    /// `1 - nrmse`.
    pub improvement: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Drive level for an input symbol: `u` rescaled from `[0, 0.5]` to `[0, 1]`.
pub fn drive_for_input(u: f64) -> f64 {
    u / INPUT_MAX
}

/// Feature row for step `t`: the last `history` timings (newest first),
/// the temperature after step `t`, and a bias.
fn feature_row(records: &[HandshakeRecord], t: usize, history: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..history).map(|i| records[t - i].delta_t_ns as f64).collect();
    row.push(records[t].temperature);
    row.push(1.0);
    row
}

/// Standardizes every column but the last (bias) with training statistics.
fn standardize(train: &mut [Vec<f64>], test: &mut [Vec<f64>]) {
    let cols = train[0].len() - 1;
    let n = train.len() as f64;
    for c in 0..cols {
        let mean = train.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = train.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in train.iter_mut().chain(test.iter_mut()) {
            r[c] = (r[c] - mean) / scale;
        }
    }
}

/// Scores one mode on `series`. The twin is advanced by the session.
pub fn run_narma_benchmark(
    mode: NarmaMode,
    twin: &mut Twin,
    channel: &ChannelConfig,
    series: &NarmaSeries,
    cfg: &NarmaConfig,
    seed: u64,
) -> Result<NarmaResult, ReservoirError> {
    cfg.validate()?;
    let first = series.warmup.max(cfg.history - 1);
    let last = series.len() - 1;
    if last <= first {
        return Err(ReservoirError::Invalid("series too short for the feature history"));
    }
    let steps: Vec<usize> = (first..last).collect();
    let split = ((steps.len() as f64) * cfg.train_fraction) as usize;
    let cols = cfg.history + 2;
    if split < cols || steps.len() - split < 2 {
        return Err(ReservoirError::Invalid("series too short for the train/test split"));
    }
    let targets: Vec<f64> = steps.iter().map(|&t| series.y[t + 1]).collect();
    let (train_y, test_y) = targets.split_at(split);

    let predictions = match mode {
        NarmaMode::Constant => {
            let m = test_y.iter().sum::<f64>() / test_y.len() as f64;
            vec![m; test_y.len()]
        }
        NarmaMode::Dialogue | NarmaMode::Monologue => {
            let depth = if mode == NarmaMode::Dialogue { 1 } else { cfg.monologue_depth };
            let payloads = series.u.iter().map(|&u| Job::payload_for_drive(drive_for_input(u)));
            let jobs = session_jobs(session_template(seed), cfg.difficulty, payloads);
            let report = run_session(twin, channel, &jobs, depth, seed)?;
            let mut rows: Vec<Vec<f64>> = steps.iter().map(|&t| feature_row(&report.records, t, cfg.history)).collect();
            let mut test_rows = rows.split_off(split);
            standardize(&mut rows, &mut test_rows);
            let w = ridge_fit(&FeatureMatrix::from_rows(&rows)?, train_y, cfg.lambda)?;
            test_rows.iter().map(|r| w.predict_row(r)).collect()
        }
    };
    let score = nrmse(&predictions, test_y)?;
    Ok(NarmaResult { mode, nrmse: score, improvement: 1.0 - score, train_rows: split, test_rows: test_y.len() })
}
