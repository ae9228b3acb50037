//! Parametric timing model of a mining device.
//!
//! A job executes `rounds` SHA-256 rounds (up to 128: two compressions).
//! Its duration is
//!
//! ```text
//! dt = rounds * t_round * (1 + alpha (T - T0)) * (1 + v) + sigma (E - 1) + leak_gain * s
//! ```
//!
//! where `t_round` scales the base round time by nominal frequency and
//! voltage, `T` is the die temperature when the job starts, `v` is a fixed
//! per-(device, template) process offset, `E ~ Exp(1)` comes from a
//! counter-based generator keyed by (seed, device id), and `s` is an
//! early-round statistic that is nonzero only in [`LeakMode::Leaky`].
//!
//! After each job the temperature relaxes toward ambient:
//! `T' = T0 + (1 - lambda) (T - T0 + gain * load)` with load measured in full
//! jobs and scaled by the job's drive level.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::header::{double_sha_header, BlockHeader, HeaderTemplate};
use super::target::{ShareConvention, TargetError, Threshold};
use crate::kv::{KvError, KvMap};
use crate::rng::{derive_key, mix64, purpose, unit_open, CounterRng};

/// Rounds in two SHA-256 compressions.
pub const MAX_ROUNDS: u32 = 128;

#[derive(Debug, Error, PartialEq)]
pub enum TwinError {
    #[error("invalid device profile: {0}")]
    Profile(String),
    #[error("rounds_executed must be in 1..=128, got {0}")]
    Rounds(u32),
    #[error("decision round must be in 1..=64, got {0}")]
    DecisionRound(usize),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("sample budget must be at least {min}, got {got}")]
    Budget { min: usize, got: usize },
    #[error("no samples fell in the bucket")]
    NoData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LeakMode {
    #[default]
    Null,
    Leaky,
}

impl fmt::Display for LeakMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeakMode::Null => "null",
            LeakMode::Leaky => "leaky",
        })
    }
}

impl FromStr for LeakMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "null" => Ok(LeakMode::Null),
            "leaky" => Ok(LeakMode::Leaky),
            other => Err(format!("unknown leak mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    pub device_id: u64,
    pub voltage: f64,
    pub frequency_mhz: f64,
    pub nominal_voltage: f64,
    pub nominal_frequency_mhz: f64,
    /// ns per round at nominal voltage and frequency.
    pub base_round_time_ns: f64,
    /// Fractional slowdown per °C above ambient.
    pub temp_coefficient: f64,
    pub ambient_c: f64,
    /// °C per full job at unit load.
    pub thermal_gain: f64,
    /// Fraction of the thermal excess shed per job, in (0, 1).
    pub thermal_decay: f64,
    pub jitter_sigma_ns: f64,
    pub leak_mode: LeakMode,
    pub leak_gain_ns: f64,
    /// Half-width of the per-template speed offset.
    pub process_variation: f64,
    /// Temperature readings are rounded to this step; 0 disables rounding.
    pub sensor_resolution_c: f64,
    pub hashrate_ghs: f64,
    pub power_w: f64,
}

/// Round time implied by a hashrate, treating one job as a full 2^32 nonce
/// scan spread over 128 rounds.
fn round_time_for(hashrate_ghs: f64) -> f64 {
    (1u64 << 32) as f64 / hashrate_ghs / MAX_ROUNDS as f64
}

impl DeviceProfile {
    pub const PRESETS: [&'static str; 3] = ["s9", "lv06", "lbbox"];

    fn base(name: &str, hashrate_ghs: f64, power_w: f64, voltage: f64, frequency_mhz: f64) -> Self {
        let base_round_time_ns = round_time_for(hashrate_ghs);
        let job = base_round_time_ns * MAX_ROUNDS as f64;
        Self {
            name: name.to_string(),
            device_id: derive_key(&[name.bytes().fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64))]),
            voltage,
            frequency_mhz,
            nominal_voltage: voltage,
            nominal_frequency_mhz: frequency_mhz,
            base_round_time_ns,
            temp_coefficient: 0.004,
            ambient_c: 25.0,
            thermal_gain: 4.0,
            thermal_decay: 0.2,
            jitter_sigma_ns: 5e-4 * job,
            leak_mode: LeakMode::Null,
            leak_gain_ns: 1.5 * base_round_time_ns,
            process_variation: 0.01,
            sensor_resolution_c: 1.0,
            hashrate_ghs,
            power_w,
        }
    }

    /// 189-chip 16 nm board: 14 TH/s, 1.3 kW.
    pub fn s9() -> Self {
        Self::base("s9", 14_000.0, 1300.0, 8.2, 525.0)
    }

    /// Single-chip 5 nm desk miner: 500 GH/s, 13 W.
    pub fn lv06() -> Self {
        Self::base("lv06", 500.0, 13.0, 1.2, 525.0)
    }

    /// 175 GH/s, 162 W.
    pub fn lbbox() -> Self {
        Self::base("lbbox", 175.0, 162.0, 1.2, 525.0)
    }

    pub fn preset(name: &str) -> Result<Self, TwinError> {
        match name {
            "s9" => Ok(Self::s9()),
            "lv06" => Ok(Self::lv06()),
            "lbbox" => Ok(Self::lbbox()),
            other => Err(TwinError::UnknownPreset(other.to_string())),
        }
    }

    pub fn with_leak(mut self, mode: LeakMode) -> Self {
        self.leak_mode = mode;
        self
    }

    pub fn with_device_id(mut self, id: u64) -> Self {
        self.device_id = id;
        self
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let bad = |m: &str| Err(TwinError::Profile(m.to_string()));
        let all_finite = [
            self.voltage,
            self.frequency_mhz,
            self.nominal_voltage,
            self.nominal_frequency_mhz,
            self.base_round_time_ns,
            self.temp_coefficient,
            self.ambient_c,
            self.thermal_gain,
            self.thermal_decay,
            self.jitter_sigma_ns,
            self.leak_gain_ns,
            self.process_variation,
            self.sensor_resolution_c,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !all_finite {
            return bad("non-finite parameter");
        }
        if self.base_round_time_ns <= 0.0 {
            return bad("base_round_time_ns must be positive");
        }
        if !(self.thermal_decay > 0.0 && self.thermal_decay < 1.0) {
            return bad("thermal_decay must lie strictly between 0 and 1");
        }
        if self.jitter_sigma_ns < 0.0 {
            return bad("jitter_sigma_ns must be non-negative");
        }
        if self.voltage <= 0.0
            || self.frequency_mhz <= 0.0
            || self.nominal_voltage <= 0.0
            || self.nominal_frequency_mhz <= 0.0
        {
            return bad("voltage and frequency must be positive");
        }
        if !(0.0..1.0).contains(&self.process_variation) {
            return bad("process_variation must lie in [0, 1)");
        }
        if self.sensor_resolution_c < 0.0 || self.leak_gain_ns < 0.0 {
            return bad("sensor_resolution_c and leak_gain_ns must be non-negative");
        }
        Ok(())
    }

    /// ns per round at the current operating point.
    pub fn round_time_ns(&self) -> f64 {
        self.base_round_time_ns
            * (self.nominal_frequency_mhz / self.frequency_mhz)
            * (self.nominal_voltage / self.voltage)
    }

    /// Thermal load of a job, in full-job units.
    pub fn load(&self, rounds: u32, drive: f64) -> f64 {
        rounds as f64 / MAX_ROUNDS as f64 * (1.0 + drive)
    }

    /// Fixed point of the thermal update under a constant load.
    pub fn steady_state_temperature(&self, load: f64) -> f64 {
        let l = self.thermal_decay;
        self.ambient_c + self.thermal_gain * load * (1.0 - l) / l
    }

    /// Per-template speed offset in `[-pv, pv]`.
    pub fn variation(&self, template_key: u64) -> f64 {
        let u = unit_open(mix64(self.device_id ^ mix64(template_key)));
        self.process_variation * (2.0 * u - 1.0)
    }

    pub fn read_sensor(&self, temperature: f64) -> f64 {
        if self.sensor_resolution_c > 0.0 {
            (temperature / self.sensor_resolution_c).round() * self.sensor_resolution_c
        } else {
            temperature
        }
    }

    /// Noise-free job duration at steady state with zero drive, excluding
    /// the per-template offset.
    pub fn nominal_job_time_ns(&self, rounds: u32) -> f64 {
        let t = self.steady_state_temperature(self.load(rounds, 0.0));
        rounds as f64 * self.round_time_ns() * (1.0 + self.temp_coefficient * (t - self.ambient_c))
    }

    /// Mean and variance of the leak term at share probability `p`.
    pub fn leak_moments(&self, p: f64) -> (f64, f64) {
        match self.leak_mode {
            LeakMode::Null => (0.0, 0.0),
            LeakMode::Leaky => {
                let g = self.leak_gain_ns;
                // s = b/2 + (popcount - 16)/32 with b = +-1 and popcount ~ Bin(32, 1/2).
                (g * 0.5 * (2.0 * p - 1.0), g * g * (p * (1.0 - p) + 8.0 / 1024.0))
            }
        }
    }

    /// Jitter needed for full-job timings at zero drive and share
    /// probability `p` to have coefficient of variation `cv`.
    pub fn with_target_cv(mut self, cv: f64, p: f64) -> Self {
        let (leak_mean, leak_var) = self.leak_moments(p);
        let mean = self.nominal_job_time_ns(MAX_ROUNDS) + leak_mean;
        self.jitter_sigma_ns = ((cv * mean).powi(2) - leak_var).max(0.0).sqrt();
        self
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.insert("name", &self.name);
        kv.insert("device_id", self.device_id);
        kv.insert("voltage", self.voltage);
        kv.insert("frequency_mhz", self.frequency_mhz);
        kv.insert("nominal_voltage", self.nominal_voltage);
        kv.insert("nominal_frequency_mhz", self.nominal_frequency_mhz);
        kv.insert("base_round_time_ns", self.base_round_time_ns);
        kv.insert("temp_coefficient", self.temp_coefficient);
        kv.insert("ambient_c", self.ambient_c);
        kv.insert("thermal_gain", self.thermal_gain);
        kv.insert("thermal_decay", self.thermal_decay);
        kv.insert("jitter_sigma_ns", self.jitter_sigma_ns);
        kv.insert("leak_mode", self.leak_mode);
        kv.insert("leak_gain_ns", self.leak_gain_ns);
        kv.insert("process_variation", self.process_variation);
        kv.insert("sensor_resolution_c", self.sensor_resolution_c);
        kv.insert("hashrate_ghs", self.hashrate_ghs);
        kv.insert("power_w", self.power_w);
        kv
    }

    /// Parses a profile file. An optional `preset` key selects the starting
    /// point (default `lv06`); every other key overrides one field.
    pub fn from_kv_text(text: &str) -> Result<Self, TwinError> {
        let mut kv = KvMap::parse(text)?;
        let mut p = Self::preset(&kv.take_str("preset").unwrap_or_else(|| "lv06".into()))?;
        if let Some(name) = kv.take_str("name") {
            p.name = name;
        }
        p.device_id = kv.take_or("device_id", p.device_id)?;
        p.voltage = kv.take_or("voltage", p.voltage)?;
        p.frequency_mhz = kv.take_or("frequency_mhz", p.frequency_mhz)?;
        p.nominal_voltage = kv.take_or("nominal_voltage", p.nominal_voltage)?;
        p.nominal_frequency_mhz = kv.take_or("nominal_frequency_mhz", p.nominal_frequency_mhz)?;
        p.base_round_time_ns = kv.take_or("base_round_time_ns", p.base_round_time_ns)?;
        p.temp_coefficient = kv.take_or("temp_coefficient", p.temp_coefficient)?;
        p.ambient_c = kv.take_or("ambient_c", p.ambient_c)?;
        p.thermal_gain = kv.take_or("thermal_gain", p.thermal_gain)?;
        p.thermal_decay = kv.take_or("thermal_decay", p.thermal_decay)?;
        p.jitter_sigma_ns = kv.take_or("jitter_sigma_ns", p.jitter_sigma_ns)?;
        p.leak_mode = kv.take_or("leak_mode", p.leak_mode)?;
        p.leak_gain_ns = kv.take_or("leak_gain_ns", p.leak_gain_ns)?;
        p.process_variation = kv.take_or("process_variation", p.process_variation)?;
        p.sensor_resolution_c = kv.take_or("sensor_resolution_c", p.sensor_resolution_c)?;
        p.hashrate_ghs = kv.take_or("hashrate_ghs", p.hashrate_ghs)?;
        p.power_w = kv.take_or("power_w", p.power_w)?;
        kv.finish()?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    pub temperature: f64,
    /// Fading trace of past drive levels.
    pub accumulator: f64,
}

impl ThermalState {
    pub fn ambient(p: &DeviceProfile) -> Self {
        Self { temperature: p.ambient_c, accumulator: 0.0 }
    }

    /// Fixed point under repeated full jobs at constant drive.
    pub fn steady(p: &DeviceProfile, drive: f64) -> Self {
        let l = p.thermal_decay;
        Self { temperature: p.steady_state_temperature(p.load(MAX_ROUNDS, drive)), accumulator: drive * (1.0 - l) / l }
    }

    /// State after a job of the given load and drive.
    pub fn step(&self, p: &DeviceProfile, load: f64, drive: f64) -> Self {
        let keep = 1.0 - p.thermal_decay;
        Self {
            temperature: p.ambient_c + keep * (self.temperature - p.ambient_c + p.thermal_gain * load),
            accumulator: keep * (self.accumulator + drive),
        }
    }

    /// One step with no work.
    pub fn idle(&self, p: &DeviceProfile) -> Self {
        self.step(p, 0.0, 0.0)
    }
}

/// Unit of work: a template, a correlation id, and the share difficulty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub template: HeaderTemplate,
    pub extranonce2: u64,
    pub difficulty: f64,
}

impl Job {
    pub fn new(template: HeaderTemplate, extranonce2: u64, difficulty: f64) -> Self {
        Self { template, extranonce2, difficulty }
    }

    /// Packs a 16-bit payload and a 48-bit sequence number.
    pub fn extranonce2_for(payload: u16, sequence: u64) -> u64 {
        ((payload as u64) << 48) | (sequence & 0xFFFF_FFFF_FFFF)
    }

    /// Payload encoding of a drive level in `[0, 1]`.
    pub fn payload_for_drive(drive: f64) -> u16 {
        (drive.clamp(0.0, 1.0) * 65535.0).round() as u16
    }

    /// Drive level carried in the payload bits, in `[0, 1]`.
    pub fn drive(&self) -> f64 {
        (self.extranonce2 >> 48) as f64 / 65535.0
    }

    /// Concrete header: the extranonce2 is mixed into the merkle root and
    /// the nonce is the device's (deterministic) find for this work.
    pub fn header(&self) -> BlockHeader {
        let mut h = self.template.with_nonce((mix64(self.extranonce2) >> 32) as u32);
        for (b, e) in h.merkle_root[..8].iter_mut().zip(self.extranonce2.to_le_bytes()) {
            *b ^= e;
        }
        h
    }
}

/// Hash-level facts about a job, independent of timing.
#[derive(Debug, Clone, PartialEq)]
pub struct JobEvaluation {
    pub header: BlockHeader,
    pub hash: [u8; 32],
    pub success: bool,
    /// Working variable `a` after each round of the nonce-bearing compression.
    pub a: [u32; 64],
}

pub fn evaluate_job(job: &Job, convention: ShareConvention) -> Result<JobEvaluation, TwinError> {
    let threshold = Threshold::new(convention, job.difficulty)?;
    let header = job.header();
    let hash = double_sha_header(&header);
    let trace = header.nonce_trace();
    let mut a = [0u32; 64];
    for (k, slot) in a.iter_mut().enumerate() {
        *slot = trace.rounds[k][0];
    }
    Ok(JobEvaluation { header, hash, success: threshold.is_met_by(&hash), a })
}

/// Early-round statistic in `[-1, 1]`: half share outcome, half the
/// centred popcount of `a` after round `min(rounds, 64)`.
pub fn early_statistic(eval: &JobEvaluation, rounds: u32) -> f64 {
    let k = (rounds.clamp(1, 64)) as usize;
    let pc = eval.a[k - 1].count_ones() as f64;
    let b = if eval.success { 1.0 } else { -1.0 };
    0.5 * b + 0.5 * (pc - 16.0) / 16.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSample {
    pub extranonce2: u64,
    pub delta_t_ns: u64,
    pub difficulty: f64,
    /// Sensor reading after the job, °C.
    pub temperature: f64,
}

/// Per-device noise source under an experiment seed.
pub fn device_noise(seed: u64, device_id: u64) -> CounterRng {
    CounterRng::new(derive_key(&[seed, device_id, purpose::DEVICE_NOISE]))
}

/// Unrounded job duration in ns.
pub fn delta_t_exact(
    p: &DeviceProfile,
    s: &ThermalState,
    job: &Job,
    eval: &JobEvaluation,
    rounds: u32,
    jitter: f64,
) -> f64 {
    let compute = rounds as f64
        * p.round_time_ns()
        * (1.0 + p.temp_coefficient * (s.temperature - p.ambient_c))
        * (1.0 + p.variation(job.template.key()));
    let leak = match p.leak_mode {
        LeakMode::Null => 0.0,
        LeakMode::Leaky => p.leak_gain_ns * early_statistic(eval, rounds),
    };
    compute + p.jitter_sigma_ns * (jitter - 1.0) + leak
}

fn check_rounds(rounds: u32) -> Result<(), TwinError> {
    if (1..=MAX_ROUNDS).contains(&rounds) {
        Ok(())
    } else {
        Err(TwinError::Rounds(rounds))
    }
}

/// One job on a device. `jitter` is the `Exp(1)` draw for this job.
pub fn simulate_timing(
    p: &DeviceProfile,
    s: &ThermalState,
    job: &Job,
    rounds: u32,
    jitter: f64,
    convention: ShareConvention,
) -> Result<(TimingSample, ThermalState), TwinError> {
    check_rounds(rounds)?;
    let eval = evaluate_job(job, convention)?;
    let dt = delta_t_exact(p, s, job, &eval, rounds, jitter);
    let next = s.step(p, p.load(rounds, job.drive()), job.drive());
    let sample = TimingSample {
        extranonce2: job.extranonce2,
        delta_t_ns: dt.round().max(1.0) as u64,
        difficulty: job.difficulty,
        temperature: p.read_sensor(next.temperature),
    };
    Ok((sample, next))
}

/// Everything known about one executed job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub sample: TimingSample,
    pub delta_t_exact: f64,
    pub eval: JobEvaluation,
    pub rounds: u32,
}

/// A simulated device: profile, thermal state and noise counter.
#[derive(Debug, Clone)]
pub struct Twin {
    profile: DeviceProfile,
    state: ThermalState,
    noise: CounterRng,
    counter: u64,
    convention: ShareConvention,
}

impl Twin {
    pub fn new(profile: DeviceProfile, seed: u64) -> Result<Self, TwinError> {
        profile.validate()?;
        let state = ThermalState::ambient(&profile);
        let noise = device_noise(seed, profile.device_id);
        Ok(Self { profile, state, noise, counter: 0, convention: ShareConvention::Desk })
    }

    pub fn with_state(mut self, state: ThermalState) -> Self {
        self.state = state;
        self
    }

    pub fn with_convention(mut self, convention: ShareConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn state(&self) -> ThermalState {
        self.state
    }

    pub fn convention(&self) -> ShareConvention {
        self.convention
    }

    /// Jobs executed so far (the noise counter).
    pub fn jobs_run(&self) -> u64 {
        self.counter
    }

    /// What the timer would read after `rounds` rounds of `job`, without
    /// committing any state change.
    pub fn observe(&self, job: &Job, rounds: u32) -> Result<JobOutcome, TwinError> {
        check_rounds(rounds)?;
        let eval = evaluate_job(job, self.convention)?;
        let jitter = self.noise.exponential(self.counter);
        let dt = delta_t_exact(&self.profile, &self.state, job, &eval, rounds, jitter);
        let after = self.state.step(&self.profile, self.profile.load(rounds, job.drive()), job.drive());
        Ok(JobOutcome {
            sample: TimingSample {
                extranonce2: job.extranonce2,
                delta_t_ns: dt.round().max(1.0) as u64,
                difficulty: job.difficulty,
                temperature: self.profile.read_sensor(after.temperature),
            },
            delta_t_exact: dt,
            eval,
            rounds,
        })
    }

    /// Commits `rounds` of work at `drive` to the thermal state and consumes
    /// one noise draw.
    pub fn advance(&mut self, rounds: u32, drive: f64) {
        self.state = self.state.step(&self.profile, self.profile.load(rounds, drive), drive);
        self.counter += 1;
    }

    /// Runs a job to `rounds` and commits it.
    pub fn run_job(&mut self, job: &Job, rounds: u32) -> Result<JobOutcome, TwinError> {
        let out = self.observe(job, rounds)?;
        self.advance(rounds, job.drive());
        Ok(out)
    }

    pub fn idle(&mut self) {
        self.state = self.state.idle(&self.profile);
    }
}
