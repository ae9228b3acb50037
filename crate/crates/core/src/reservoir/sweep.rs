//! Voltage / frequency / difficulty grid over the timing order parameters.

use std::thread;

use super::metrics::{classify_regime, coefficient_of_variation, window_entropy, Regime};
use super::ReservoirError;
use crate::rng::derive_key;
use crate::sha_twin::{DeviceProfile, ThermalState, Twin};
use crate::swh::{run_swh_session, ChannelConfig};

/// Windows with fewer samples are skipped when averaging.
pub const MIN_WINDOW_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub voltages: Vec<f64>,
    pub frequencies_mhz: Vec<f64>,
    pub difficulties: Vec<f64>,
    pub samples_per_cell: usize,
    pub window_s: f64,
    pub bins: usize,
    pub channel: ChannelConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            voltages: vec![7.6, 8.2],
            frequencies_mhz: vec![300.0, 525.0, 575.0],
            difficulties: vec![1024.0, 16384.0],
            samples_per_cell: 500,
            window_s: 2.0,
            bins: 16,
            channel: ChannelConfig::ideal(),
        }
    }
}

impl SweepConfig {
    /// A single cell at the profile's own operating point.
    pub fn single(profile: &DeviceProfile, difficulty: f64) -> Self {
        Self {
            voltages: vec![profile.voltage],
            frequencies_mhz: vec![profile.frequency_mhz],
            difficulties: vec![difficulty],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ReservoirError> {
        if self.voltages.is_empty() || self.frequencies_mhz.is_empty() || self.difficulties.is_empty() {
            return Err(ReservoirError::Invalid("sweep grids must be non-empty"));
        }
        if self.samples_per_cell < 2 {
            return Err(ReservoirError::Invalid("need at least two samples per cell"));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(ReservoirError::Invalid("window length must be positive"));
        }
        if self.bins < 2 {
            return Err(ReservoirError::Invalid("need at least two entropy bins"));
        }
        self.channel.validate().map_err(|_| ReservoirError::Invalid("bad sweep channel"))
    }

    /// Grid cells in row order: voltage, then frequency, then difficulty.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &v in &self.voltages {
            for &f in &self.frequencies_mhz {
                for &d in &self.difficulties {
                    out.push((v, f, d));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub voltage: f64,
    pub frequency_mhz: f64,
    pub difficulty: f64,
    pub entropy: f64,
    pub cv: f64,
    pub regime: Regime,
    pub samples: usize,
    /// Windows that contributed to the averages.
    pub windows: usize,
}

/// Entropy and CV averaged over fixed-length windows of receive time.
pub fn windowed_metrics(
    times_ns: &[u64],
    timings: &[f64],
    window_s: f64,
    bins: usize,
) -> Result<(f64, f64, usize), ReservoirError> {
    let window_ns = window_s * 1e9;
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (&t, &x) in times_ns.iter().zip(timings) {
        let w = (t as f64 / window_ns) as usize;
        if groups.len() <= w {
            groups.resize(w + 1, Vec::new());
        }
        groups[w].push(x);
    }
    groups.retain(|g| g.len() >= MIN_WINDOW_SAMPLES);
    if groups.is_empty() {
        groups.push(timings.to_vec());
    }
    let (mut h, mut cv) = (0.0, 0.0);
    for g in &groups {
        h += window_entropy(g, bins)?;
        cv += coefficient_of_variation(g)?;
    }
    let n = groups.len() as f64;
    Ok((h / n, cv / n, groups.len()))
}

fn run_cell(
    cfg: &SweepConfig,
    template: &DeviceProfile,
    (voltage, frequency_mhz, difficulty): (f64, f64, f64),
    seed: u64,
) -> Result<SweepRow, ReservoirError> {
    let mut profile = template.clone();
    profile.voltage = voltage;
    profile.frequency_mhz = frequency_mhz;
    let state = ThermalState::steady(&profile, 0.0);
    let mut twin = Twin::new(profile, seed)?.with_state(state);
    let records = run_swh_session(&mut twin, &cfg.channel, cfg.samples_per_cell, difficulty, seed)?;
    let times: Vec<u64> = records.iter().map(|r| r.t_recv_ns).collect();
    let timings: Vec<f64> = records.iter().map(|r| r.delta_t_ns as f64).collect();
    let (entropy, cv, windows) = windowed_metrics(&times, &timings, cfg.window_s, cfg.bins)?;
    Ok(SweepRow {
        voltage,
        frequency_mhz,
        difficulty,
        entropy,
        cv,
        regime: classify_regime(cv),
        samples: records.len(),
        windows,
    })
}

/// One row per grid cell. Each cell runs a fresh blocking session seeded
/// from `(seed, cell index)`; cells run on worker threads.
pub fn vfd_sweep(cfg: &SweepConfig, template: &DeviceProfile, seed: u64) -> Result<Vec<SweepRow>, ReservoirError> {
    cfg.validate()?;
    template.validate()?;
    let cells = cfg.cells();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
    let mut results: Vec<Option<Result<SweepRow, ReservoirError>>> = (0..cells.len()).map(|_| None).collect();
    thread::scope(|s| {
        for (w, chunk) in results.chunks_mut(cells.len().div_ceil(workers)).enumerate() {
            let cells = &cells;
            s.spawn(move || {
                let base = w * cells.len().div_ceil(workers);
                for (j, slot) in chunk.iter_mut().enumerate() {
                    let i = base + j;
                    *slot = Some(run_cell(cfg, template, cells[i], derive_key(&[seed, i as u64])));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every cell runs")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_and_determinism() {
        let p = DeviceProfile::lv06();
        let cfg = SweepConfig { samples_per_cell: 200, ..SweepConfig::single(&p, 64.0) };
        let a = vfd_sweep(&cfg, &p, 9).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, vfd_sweep(&cfg, &p, 9).unwrap());
        assert_eq!(a[0].samples, 200);
        assert_eq!(a[0].regime, Regime::Sync);
    }

    #[test]
    fn grid_shape() {
        let cfg = SweepConfig { samples_per_cell: 50, ..SweepConfig::default() };
        let rows = vfd_sweep(&cfg, &DeviceProfile::s9(), 1).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!((rows[1].voltage, rows[1].frequency_mhz, rows[1].difficulty), (7.6, 300.0, 16384.0));
        let empty = SweepConfig { voltages: vec![], ..SweepConfig::default() };
        assert!(vfd_sweep(&empty, &DeviceProfile::s9(), 1).is_err());
    }

    #[test]
    fn recovers_configured_cv() {
        let p = DeviceProfile::lv06().with_target_cv(0.586, 0.0);
        let cfg = SweepConfig::single(&p, 1024.0);
        let row = &vfd_sweep(&cfg, &p, 3).unwrap()[0];
        assert!((row.cv - 0.586).abs() < 0.05, "{}", row.cv);
        assert_eq!(row.regime, Regime::Optimal);
    }
}
