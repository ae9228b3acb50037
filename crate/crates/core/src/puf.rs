//! Device authentication from per-challenge timing distributions.
//!
//! A challenge is a header template. Enrollment runs a blocking session per
//! challenge and stores the histogram of `delta_t` over a fixed bin grid.
//! Verification compares a fresh response profile bucket by bucket with
//! total variation distance and accepts when the worst bucket is within
//! the threshold.

use std::fmt::Write as _;

use thiserror::Error;

use crate::infotheory::{distinguishability_witness, empirical_over, total_variation, FiniteDistribution, InfoError};
use crate::infotheory::{parse_distribution, write_distribution};
use crate::rng::{derive_key, purpose, stream};
use crate::sha_twin::{BlockHeader, DeviceProfile, HeaderTemplate, ThermalState, Twin, TwinError, MAX_ROUNDS};
use crate::swh::{run_session, session_jobs, ChannelConfig, SessionError};

pub const DEFAULT_THRESHOLD: f64 = 0.15;
pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_CHALLENGES: usize = 8;
pub const DEFAULT_SAMPLES: usize = 400;
pub const DEFAULT_BINS: u16 = 16;
/// Grid half-width relative to the nominal job time.
pub const GRID_HALF_WIDTH: f64 = 0.02;
pub const CHALLENGE_DIFFICULTY: f64 = 1024.0;
const FORMAT_HEADER: &str = "# silicon-puf-profile 1";

#[derive(Debug, Error, PartialEq)]
pub enum PufError {
    #[error("{0}")]
    Invalid(&'static str),
    #[error("challenge {bucket} has {got} samples, need at least {min}")]
    UnderSampled { bucket: usize, got: usize, min: usize },
    #[error("response does not cover the enrolled challenges")]
    Coverage,
    #[error("profile line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Twin(#[from] TwinError),
}

/// Equal-width bins over `[lo, hi]`; values outside land in the end bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    pub lo: f64,
    pub hi: f64,
    pub bins: u16,
}

impl BinGrid {
    pub fn new(lo: f64, hi: f64, bins: u16) -> Result<Self, PufError> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || bins < 2 {
            return Err(PufError::Invalid("bin grid needs lo < hi and at least two bins"));
        }
        Ok(Self { lo, hi, bins })
    }

    /// `DEFAULT_BINS` bins within 2% of the device's nominal job time.
    pub fn for_device(p: &DeviceProfile) -> Self {
        let c = p.nominal_job_time_ns(MAX_ROUNDS);
        Self { lo: c * (1.0 - GRID_HALF_WIDTH), hi: c * (1.0 + GRID_HALF_WIDTH), bins: DEFAULT_BINS }
    }

    pub fn bin(&self, x: f64) -> u16 {
        let f = (x - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (f.max(0.0) as u64).min(self.bins as u64 - 1) as u16
    }

    pub fn universe(&self) -> Vec<u16> {
        (0..self.bins).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditions {
    pub voltage: f64,
    pub frequency_mhz: f64,
    pub ambient_c: f64,
}

impl Conditions {
    pub fn of(p: &DeviceProfile) -> Self {
        Self { voltage: p.voltage, frequency_mhz: p.frequency_mhz, ambient_c: p.ambient_c }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeProfile {
    pub template: HeaderTemplate,
    pub samples: usize,
    pub distribution: FiniteDistribution<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingProfile {
    pub conditions: Conditions,
    pub grid: BinGrid,
    pub buckets: Vec<ChallengeProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision {
    pub accept: bool,
    /// Largest per-challenge total variation distance.
    pub statistic: f64,
    pub threshold: f64,
    pub gaps: Vec<f64>,
}

/// Where two profiles differ most.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PufWitness {
    pub bucket: usize,
    pub bin: u16,
    /// `|P_a(bin) - P_b(bin)|` in that bucket.
    pub gap: f64,
    pub first_mass: f64,
    pub second_mass: f64,
}

/// `count` challenge templates drawn from the seed.
pub fn challenge_set(seed: u64, count: usize) -> Vec<HeaderTemplate> {
    let mut rng = stream(seed, purpose::CHALLENGE);
    (0..count).map(|_| HeaderTemplate::random(&mut rng)).collect()
}

/// `samples` timings for one challenge from a device at steady state over
/// an ideal link.
pub fn collect_timings(
    device: &DeviceProfile,
    challenge: HeaderTemplate,
    samples: usize,
    seed: u64,
) -> Result<Vec<u64>, PufError> {
    if samples == 0 {
        return Err(PufError::Invalid("need at least one sample"));
    }
    let state = ThermalState::steady(device, 0.0);
    let mut twin = Twin::new(device.clone(), seed)?.with_state(state);
    let jobs = session_jobs(challenge, CHALLENGE_DIFFICULTY, std::iter::repeat_n(0, samples));
    let report = run_session(&mut twin, &ChannelConfig::ideal(), &jobs, 1, seed)?;
    Ok(report.records.iter().map(|r| r.delta_t_ns).collect())
}

fn bucket_of(grid: &BinGrid, template: HeaderTemplate, timings: &[u64]) -> Result<ChallengeProfile, PufError> {
    let bins: Vec<u16> = timings.iter().map(|&t| grid.bin(t as f64)).collect();
    Ok(ChallengeProfile { template, samples: timings.len(), distribution: empirical_over(&grid.universe(), &bins)? })
}

fn measure(
    device: &DeviceProfile,
    grid: BinGrid,
    conditions: Conditions,
    challenges: &[HeaderTemplate],
    samples: usize,
    seed: u64,
) -> Result<TimingProfile, PufError> {
    if challenges.is_empty() {
        return Err(PufError::Invalid("need at least one challenge"));
    }
    if samples < MIN_SAMPLES {
        return Err(PufError::UnderSampled { bucket: 0, got: samples, min: MIN_SAMPLES });
    }
    let buckets = challenges
        .iter()
        .enumerate()
        .map(|(i, &c)| bucket_of(&grid, c, &collect_timings(device, c, samples, derive_key(&[seed, i as u64]))?))
        .collect::<Result<_, _>>()?;
    Ok(TimingProfile { conditions, grid, buckets })
}

/// Enrollment under the device's own operating conditions.
pub fn enroll(
    device: &DeviceProfile,
    challenges: &[HeaderTemplate],
    samples_per_challenge: usize,
    seed: u64,
) -> Result<TimingProfile, PufError> {
    measure(device, BinGrid::for_device(device), Conditions::of(device), challenges, samples_per_challenge, seed)
}

/// A claimant's answers to the enrolled challenges, binned on the enrolled
/// grid.
pub fn respond(
    device: &DeviceProfile,
    enrolled: &TimingProfile,
    samples_per_challenge: usize,
    seed: u64,
) -> Result<TimingProfile, PufError> {
    let challenges: Vec<HeaderTemplate> = enrolled.buckets.iter().map(|b| b.template).collect();
    measure(device, enrolled.grid, Conditions::of(device), &challenges, samples_per_challenge, seed)
}

fn check_coverage(a: &TimingProfile, b: &TimingProfile) -> Result<(), PufError> {
    let same = a.grid == b.grid
        && a.buckets.len() == b.buckets.len()
        && a.buckets.iter().zip(&b.buckets).all(|(x, y)| x.template == y.template);
    if same {
        Ok(())
    } else {
        Err(PufError::Coverage)
    }
}

pub fn verify(enrolled: &TimingProfile, response: &TimingProfile, threshold: f64) -> Result<AuthDecision, PufError> {
    check_coverage(enrolled, response)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(PufError::Invalid("threshold must lie in [0, 1]"));
    }
    let gaps = enrolled
        .buckets
        .iter()
        .zip(&response.buckets)
        .map(|(a, b)| total_variation(&a.distribution, &b.distribution))
        .collect::<Result<Vec<f64>, _>>()?;
    let statistic = gaps.iter().copied().fold(0.0, f64::max);
    Ok(AuthDecision { accept: statistic <= threshold, statistic, threshold, gaps })
}

/// The largest single-bin separation across buckets, if it exceeds `tol`.
pub fn distinguish(a: &TimingProfile, b: &TimingProfile, tol: f64) -> Result<Option<PufWitness>, PufError> {
    check_coverage(a, b)?;
    let mut best: Option<PufWitness> = None;
    for (i, (x, y)) in a.buckets.iter().zip(&b.buckets).enumerate() {
        if let Some(w) = distinguishability_witness(&x.distribution, &y.distribution, tol)? {
            if best.is_none_or(|b| w.gap > b.gap) {
                best = Some(PufWitness {
                    bucket: i,
                    bin: w.outcome,
                    gap: w.gap,
                    first_mass: w.first_mass,
                    second_mass: w.second_mass,
                });
            }
        }
    }
    Ok(best)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

impl TimingProfile {
    pub fn to_text(&self) -> Result<String, PufError> {
        let c = &self.conditions;
        let mut out = format!("{FORMAT_HEADER}\n");
        let _ = writeln!(out, "# conditions {:?} {:?} {:?}", c.voltage, c.frequency_mhz, c.ambient_c);
        let _ = writeln!(out, "# grid {:?} {:?} {}", self.grid.lo, self.grid.hi, self.grid.bins);
        for b in &self.buckets {
            let _ = writeln!(out, "# challenge {} {}", hex(&b.template.with_nonce(0).serialize()), b.samples);
            out.push_str(&write_distribution(&b.distribution)?);
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self, PufError> {
        let bad = |line: usize, reason: &str| PufError::Format { line, reason: reason.to_string() };
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&FORMAT_HEADER) {
            return Err(bad(1, "missing profile header"));
        }
        let nums = |line: usize, rest: &str, n: usize| -> Result<Vec<f64>, PufError> {
            let v: Vec<f64> = rest
                .split(' ')
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(line, "bad number"))?;
            if v.len() == n {
                Ok(v)
            } else {
                Err(bad(line, "wrong field count"))
            }
        };
        let cond =
            lines.get(1).and_then(|l| l.strip_prefix("# conditions ")).ok_or_else(|| bad(2, "missing conditions"))?;
        let cv = nums(2, cond, 3)?;
        let grid = lines.get(2).and_then(|l| l.strip_prefix("# grid ")).ok_or_else(|| bad(3, "missing grid"))?;
        let gv = nums(3, grid, 3)?;
        if gv[2].fract() != 0.0 || !(2.0..=u16::MAX as f64).contains(&gv[2]) {
            return Err(bad(3, "bad bin count"));
        }
        let grid = BinGrid::new(gv[0], gv[1], gv[2] as u16).map_err(|_| bad(3, "bad grid"))?;
        let mut buckets = Vec::new();
        let mut i = 3;
        while i < lines.len() {
            let head =
                lines[i].strip_prefix("# challenge ").ok_or_else(|| bad(i + 1, "expected a challenge section"))?;
            let (h, n) = head.split_once(' ').ok_or_else(|| bad(i + 1, "bad challenge line"))?;
            let bytes: [u8; 80] =
                unhex(h).and_then(|v| v.try_into().ok()).ok_or_else(|| bad(i + 1, "challenge must be 80 hex bytes"))?;
            let samples: usize = n.parse().map_err(|_| bad(i + 1, "bad sample count"))?;
            let start = i + 1;
            i = start;
            while i < lines.len() && !lines[i].starts_with("# challenge ") {
                i += 1;
            }
            let body = lines[start..i].join("\n");
            let distribution = parse_distribution::<u16>(&body).map_err(|e| bad(start + 1, &e.to_string()))?;
            buckets.push(ChallengeProfile {
                template: BlockHeader::deserialize(&bytes).template(),
                samples,
                distribution,
            });
        }
        if buckets.is_empty() {
            return Err(bad(lines.len(), "profile has no challenges"));
        }
        Ok(Self { conditions: Conditions { voltage: cv[0], frequency_mhz: cv[1], ambient_c: cv[2] }, grid, buckets })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PufConfig {
    pub challenges: usize,
    pub samples_per_challenge: usize,
    pub threshold: f64,
    /// Minimum bin separation for a witness.
    pub witness_tol: f64,
    pub trials: usize,
}

impl Default for PufConfig {
    fn default() -> Self {
        Self {
            challenges: DEFAULT_CHALLENGES,
            samples_per_challenge: DEFAULT_SAMPLES,
            threshold: DEFAULT_THRESHOLD,
            witness_tol: 0.1,
            trials: 100,
        }
    }
}

/// One enrollment with a genuine and an impostor response.
#[derive(Debug, Clone, PartialEq)]
pub struct PufTrial {
    pub genuine: AuthDecision,
    pub impostor: AuthDecision,
    pub witness: Option<PufWitness>,
    /// Signed gap at the witness bin on fresh samples, oriented so that a
    /// positive value agrees with the witness.
    pub replay_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PufReport {
    pub trials: Vec<PufTrial>,
}

impl PufReport {
    fn rate(&self, f: impl Fn(&PufTrial) -> bool) -> f64 {
        self.trials.iter().filter(|t| f(t)).count() as f64 / self.trials.len().max(1) as f64
    }

    pub fn accept_rate(&self) -> f64 {
        self.rate(|t| t.genuine.accept)
    }

    pub fn reject_rate(&self) -> f64 {
        self.rate(|t| !t.impostor.accept)
    }

    pub fn witness_rate(&self) -> f64 {
        self.rate(|t| t.witness.is_some())
    }

    /// Among trials with a witness, the fraction whose replay gap exceeds
    /// `tol / 2`.
    pub fn replay_rate(&self, tol: f64) -> f64 {
        let with: Vec<f64> = self.trials.iter().filter_map(|t| t.replay_gap).collect();
        if with.is_empty() {
            return 0.0;
        }
        with.iter().filter(|g| **g > tol / 2.0).count() as f64 / with.len() as f64
    }
}

fn mass_at(p: &TimingProfile, bucket: usize, bin: u16) -> f64 {
    p.buckets[bucket].distribution.mass(&bin)
}

fn run_trial(template: &DeviceProfile, cfg: &PufConfig, seed: u64, t: u64) -> Result<PufTrial, PufError> {
    let key = |k: u64| derive_key(&[seed, t, k]);
    let genuine = template.clone().with_device_id(key(0));
    let impostor = template.clone().with_device_id(key(1));
    let challenges = challenge_set(key(2), cfg.challenges);
    let enrolled = enroll(&genuine, &challenges, cfg.samples_per_challenge, key(3))?;
    let g = respond(&genuine, &enrolled, cfg.samples_per_challenge, key(4))?;
    let i = respond(&impostor, &enrolled, cfg.samples_per_challenge, key(5))?;
    let witness = distinguish(&enrolled, &i, cfg.witness_tol)?;
    let replay_gap = match witness {
        Some(w) => {
            let a = respond(&genuine, &enrolled, cfg.samples_per_challenge, key(6))?;
            let b = respond(&impostor, &enrolled, cfg.samples_per_challenge, key(7))?;
            let sign = if w.first_mass >= w.second_mass { 1.0 } else { -1.0 };
            Some(sign * (mass_at(&a, w.bucket, w.bin) - mass_at(&b, w.bucket, w.bin)))
        }
        None => None,
    };
    Ok(PufTrial {
        genuine: verify(&enrolled, &g, cfg.threshold)?,
        impostor: verify(&enrolled, &i, cfg.threshold)?,
        witness,
        replay_gap,
    })
}

/// Per trial: fresh genuine and impostor device ids drawn from `template`,
/// fresh challenges, enrollment, one response from each device, and a
/// replay of any witness on further fresh responses. Trials are seeded
/// independently and run on worker threads.
pub fn puf_study(template: &DeviceProfile, cfg: &PufConfig, seed: u64) -> Result<PufReport, PufError> {
    if cfg.trials == 0 {
        return Err(PufError::Invalid("need at least one trial"));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.trials);
    let per = cfg.trials.div_ceil(workers);
    let mut slots: Vec<Option<Result<PufTrial, PufError>>> = (0..cfg.trials).map(|_| None).collect();
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(per).enumerate() {
            s.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_trial(template, cfg, seed, (w * per + j) as u64));
                }
            });
        }
    });
    let trials = slots.into_iter().map(|s| s.expect("every trial runs")).collect::<Result<_, _>>()?;
    Ok(PufReport { trials })
}
