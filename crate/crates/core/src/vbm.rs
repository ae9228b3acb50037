//! Mining-loop throughput with and without template prefetch.
//!
//! Unit `i` needs a template fetch (network round trip plus stratum
//! processing) before it can be hashed. Fetch `i` starts once fetch `i-1`
//! has finished and a buffer slot is free, i.e. unit `i - depth` is done.
//! Depth 1 is the serial fetch-then-hash loop.

use std::fmt;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::kv::{KvError, KvMap};
use crate::rng::{purpose, stream};

#[derive(Debug, Error, PartialEq)]
pub enum VbmError {
    #[error("invalid loop parameters: {0}")]
    Invalid(&'static str),
    #[error("fraction {0} outside [0, 1)")]
    Fraction(f64),
    #[error(transparent)]
    Kv(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopParams {
    pub t_hash_ns: u64,
    /// Mean network round trip per fetch.
    pub t_network_ns: u64,
    pub network_jitter_ns: f64,
    pub t_stratum_ns: u64,
    pub duration_ns: u64,
    pub buffer_depth: usize,
    pub seed: u64,
}

impl Default for LoopParams {
    /// The 0.8-efficiency operating point: overheads total a quarter of
    /// the hashing time.
    fn default() -> Self {
        Self {
            t_hash_ns: 8_000_000,
            t_network_ns: 1_500_000,
            network_jitter_ns: 0.0,
            t_stratum_ns: 500_000,
            duration_ns: 10_000_000_000,
            buffer_depth: 2,
            seed: 0,
        }
    }
}

impl LoopParams {
    pub fn validate(&self) -> Result<(), VbmError> {
        if self.t_hash_ns == 0 {
            return Err(VbmError::Invalid("t_hash must be positive"));
        }
        if self.duration_ns == 0 {
            return Err(VbmError::Invalid("duration must be positive"));
        }
        if self.buffer_depth == 0 {
            return Err(VbmError::Invalid("buffer depth must be at least 1"));
        }
        if !(self.network_jitter_ns.is_finite() && self.network_jitter_ns >= 0.0) {
            return Err(VbmError::Invalid("network jitter must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn overhead_ns(&self) -> u64 {
        self.t_network_ns + self.t_stratum_ns
    }

    /// Serial efficiency with deterministic latencies.
    pub fn serial_efficiency(&self) -> f64 {
        self.t_hash_ns as f64 / (self.t_hash_ns + self.overhead_ns()) as f64
    }

    /// Prefetch efficiency with deterministic latencies.
    pub fn prefetch_efficiency(&self) -> f64 {
        (self.t_hash_ns as f64 / self.overhead_ns().max(1) as f64).min(1.0)
    }

    /// Reads `vbm.*` keys, leaving others untouched.
    pub fn take_from(kv: &mut KvMap, base: Self) -> Result<Self, VbmError> {
        let p = Self {
            t_hash_ns: kv.take_or("vbm.t_hash_ns", base.t_hash_ns)?,
            t_network_ns: kv.take_or("vbm.t_network_ns", base.t_network_ns)?,
            network_jitter_ns: kv.take_or("vbm.network_jitter_ns", base.network_jitter_ns)?,
            t_stratum_ns: kv.take_or("vbm.t_stratum_ns", base.t_stratum_ns)?,
            duration_ns: kv.take_or("vbm.duration_ns", base.duration_ns)?,
            buffer_depth: kv.take_or("vbm.buffer_depth", base.buffer_depth)?,
            seed: base.seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn write_to(&self, kv: &mut KvMap) {
        kv.insert("vbm.t_hash_ns", self.t_hash_ns);
        kv.insert("vbm.t_network_ns", self.t_network_ns);
        kv.insert("vbm.network_jitter_ns", self.network_jitter_ns);
        kv.insert("vbm.t_stratum_ns", self.t_stratum_ns);
        kv.insert("vbm.duration_ns", self.duration_ns);
        kv.insert("vbm.buffer_depth", self.buffer_depth);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    Serial,
    Prefetch,
}

impl fmt::Display for LoopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoopMode::Serial => "serial",
            LoopMode::Prefetch => "vbm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningLoopStats {
    pub mode: LoopMode,
    pub wall_ns: u64,
    pub busy_ns: u64,
    pub idle_ns: u64,
    pub units: u64,
    /// Completed units per second.
    pub rate_per_s: f64,
    /// `busy / wall`.
    pub efficiency: f64,
}

/// Fetch durations, identical across modes for the same seed.
struct Fetches {
    rng: rand_chacha::ChaCha8Rng,
    latency: Option<Normal<f64>>,
    mean: u64,
    stratum: u64,
}

impl Fetches {
    fn new(p: &LoopParams) -> Self {
        let latency = (p.network_jitter_ns > 0.0)
            .then(|| Normal::new(p.t_network_ns as f64, p.network_jitter_ns).expect("validated jitter"));
        Self { rng: stream(p.seed, purpose::FETCH), latency, mean: p.t_network_ns, stratum: p.t_stratum_ns }
    }

    fn next(&mut self) -> u64 {
        let net = match &self.latency {
            Some(n) => n.sample(&mut self.rng).max(0.0).round() as u64,
            None => self.mean,
        };
        net + self.stratum
    }
}

fn simulate(p: &LoopParams, depth: usize, mode: LoopMode) -> Result<MiningLoopStats, VbmError> {
    p.validate()?;
    let mut fetches = Fetches::new(p);
    // Completion times of the last `depth` units, oldest first.
    let mut done: std::collections::VecDeque<u64> = std::collections::VecDeque::with_capacity(depth + 1);
    let (mut fetched, mut last_end) = (0u64, 0u64);
    let (mut units, mut busy) = (0u64, 0u64);
    loop {
        let slot_free = if done.len() == depth { done[0] } else { 0 };
        let start_fetch = fetched.max(slot_free);
        if start_fetch >= p.duration_ns {
            break;
        }
        fetched = start_fetch + fetches.next();
        let start = fetched.max(last_end);
        let end = start + p.t_hash_ns;
        if start >= p.duration_ns {
            break;
        }
        if end > p.duration_ns {
            busy += p.duration_ns - start;
            break;
        }
        busy += p.t_hash_ns;
        units += 1;
        last_end = end;
        if done.len() == depth {
            done.pop_front();
        }
        done.push_back(end);
    }
    let wall = p.duration_ns;
    Ok(MiningLoopStats {
        mode,
        wall_ns: wall,
        busy_ns: busy,
        idle_ns: wall - busy,
        units,
        rate_per_s: units as f64 / (wall as f64 * 1e-9),
        efficiency: busy as f64 / wall as f64,
    })
}

/// Fetch, then hash, one unit at a time.
pub fn simulate_serial(p: &LoopParams) -> Result<MiningLoopStats, VbmError> {
    simulate(p, 1, LoopMode::Serial)
}

/// Prefetching loop with `p.buffer_depth` template slots.
pub fn simulate_vbm(p: &LoopParams) -> Result<MiningLoopStats, VbmError> {
    if p.buffer_depth < 2 {
        return Err(VbmError::Invalid("prefetch needs a buffer depth of at least 2"));
    }
    simulate(p, p.buffer_depth, LoopMode::Prefetch)
}

/// Relative throughput gain of prefetch over serial.
pub fn throughput_gain(serial: &MiningLoopStats, vbm: &MiningLoopStats) -> f64 {
    vbm.efficiency / serial.efficiency - 1.0
}

/// Independent savings compose multiplicatively: `1 - (1-a)(1-b)`.
pub fn combined_savings(tpf: f64, vbm: f64) -> Result<f64, VbmError> {
    for f in [tpf, vbm] {
        if !(0.0..1.0).contains(&f) {
            return Err(VbmError::Fraction(f));
        }
    }
    Ok(1.0 - (1.0 - tpf) * (1.0 - vbm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(h: u64, net: u64, stratum: u64) -> LoopParams {
        LoopParams {
            t_hash_ns: h,
            t_network_ns: net,
            t_stratum_ns: stratum,
            duration_ns: 1_000_000,
            ..LoopParams::default()
        }
    }

    #[test]
    fn serial_closed_forms() {
        let s = simulate_serial(&params(400, 0, 0)).unwrap();
        assert_eq!(s.efficiency, 1.0);
        let s = simulate_serial(&params(400, 70, 30)).unwrap();
        assert!((s.efficiency - 0.8).abs() < 0.02 * 0.8);
        assert_eq!(s.busy_ns + s.idle_ns, s.wall_ns);
        let mut long = params(400, 70, 30);
        long.duration_ns *= 2;
        let l = simulate_serial(&long).unwrap();
        assert!(l.units.abs_diff(2 * s.units) <= 1);
    }

    #[test]
    fn prefetch_operating_points() {
        let p = params(400, 70, 30);
        let (s, v) = (simulate_serial(&p).unwrap(), simulate_vbm(&p).unwrap());
        assert!(v.efficiency >= 0.99);
        assert!((throughput_gain(&s, &v) - 0.25).abs() < 0.01);
        let z = params(400, 0, 0);
        let (s, v) = (simulate_serial(&z).unwrap(), simulate_vbm(&z).unwrap());
        assert_eq!((s.units, s.busy_ns), (v.units, v.busy_ns));
        let slow = params(400, 600, 200);
        let v = simulate_vbm(&slow).unwrap();
        assert!((v.efficiency - slow.prefetch_efficiency()).abs() < 0.01, "{}", v.efficiency);
        assert!(simulate_vbm(&LoopParams { buffer_depth: 1, ..slow }).is_err());
    }

    #[test]
    fn combined() {
        assert!((combined_savings(0.92, 0.25).unwrap() - 0.94).abs() < 1e-12);
        assert_eq!(combined_savings(0.0, 0.0).unwrap(), 0.0);
        assert!((combined_savings(0.885, 0.25).unwrap() - 0.91375).abs() < 1e-12);
        assert!(combined_savings(1.0, 0.0).is_err());
    }

    #[test]
    fn kv_round_trip() {
        let mut kv = KvMap::default();
        let p = params(5, 6, 7);
        p.write_to(&mut kv);
        assert_eq!(LoopParams::take_from(&mut kv, LoopParams::default()).unwrap(), LoopParams { seed: 0, ..p });
    }
}
