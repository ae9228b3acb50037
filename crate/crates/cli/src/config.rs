//! Experiment parameters from a `key=value` file. Every subcommand consumes
//! its own keys; anything left over is a usage error. The resolved values
//! are echoed back so the manifest records the full run.

use std::fmt::Display;
use std::path::Path;

use silicon_core::infotheory::selftest::SelfTestConfig;
use silicon_core::kv::{KvError, KvMap};
use silicon_core::puf::PufConfig;
use silicon_core::reservoir::{narma_channel, NarmaConfig, NarmaMode, SweepConfig};
use silicon_core::tpf::{TpfConfig, TrainParams};
use silicon_core::{ChannelConfig, DeviceProfile, LoopParams};

use crate::Failure;

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

pub fn load_kv(path: Option<&Path>) -> Result<KvMap, Failure> {
    match path {
        None => Ok(KvMap::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            KvMap::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

/// A preset name, or a path to a profile file.
pub fn load_profile(choice: Option<&str>, default: &str) -> Result<DeviceProfile, Failure> {
    let choice = choice.unwrap_or(default);
    if DeviceProfile::PRESETS.contains(&choice) {
        return DeviceProfile::preset(choice).map_err(usage);
    }
    let text = std::fs::read_to_string(choice).map_err(|e| {
        usage(format!("{choice:?} is neither a preset ({}) nor a readable file: {e}", DeviceProfile::PRESETS.join(", ")))
    })?;
    DeviceProfile::from_kv_text(&text).map_err(|e| usage(format!("{choice}: {e}")))
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn kv<T>(r: Result<T, KvError>) -> Result<T, Failure> {
    r.map_err(usage)
}

fn list_or<T: std::str::FromStr>(m: &mut KvMap, key: &str, default: Vec<T>) -> Result<Vec<T>, Failure> {
    Ok(kv(m.take_list(key))?.unwrap_or(default))
}

/// Consumes the map, rejecting unknown keys.
fn finish(m: KvMap) -> Result<(), Failure> {
    kv(m.finish())
}

pub fn selftest(mut m: KvMap, seed: u64) -> Result<(SelfTestConfig, KvMap), Failure> {
    let d = SelfTestConfig::default();
    let c = SelfTestConfig {
        seed,
        cases: kv(m.take_or("selftest.cases", d.cases))?,
        predictor_cases: kv(m.take_or("selftest.predictor_cases", d.predictor_cases))?,
    };
    finish(m)?;
    let mut echo = KvMap::default();
    echo.insert("selftest.cases", c.cases);
    echo.insert("selftest.predictor_cases", c.predictor_cases);
    Ok((c, echo))
}

pub fn sweep(mut m: KvMap) -> Result<(SweepConfig, KvMap), Failure> {
    let d = SweepConfig::default();
    let c = SweepConfig {
        voltages: list_or(&mut m, "sweep.voltages", d.voltages)?,
        frequencies_mhz: list_or(&mut m, "sweep.frequencies_mhz", d.frequencies_mhz)?,
        difficulties: list_or(&mut m, "sweep.difficulties", d.difficulties)?,
        samples_per_cell: kv(m.take_or("sweep.samples", d.samples_per_cell))?,
        window_s: kv(m.take_or("sweep.window_s", d.window_s))?,
        bins: kv(m.take_or("sweep.bins", d.bins))?,
        channel: ChannelConfig::take_from(&mut m, d.channel).map_err(usage)?,
    };
    finish(m)?;
    c.validate().map_err(usage)?;
    let mut echo = KvMap::default();
    echo.insert("sweep.voltages", join(&c.voltages));
    echo.insert("sweep.frequencies_mhz", join(&c.frequencies_mhz));
    echo.insert("sweep.difficulties", join(&c.difficulties));
    echo.insert("sweep.samples", c.samples_per_cell);
    echo.insert("sweep.window_s", c.window_s);
    echo.insert("sweep.bins", c.bins);
    c.channel.write_to(&mut echo);
    Ok((c, echo))
}

#[derive(Debug, Clone)]
pub struct NarmaRun {
    pub length: usize,
    pub warmup: usize,
    /// Constant drive level of the pre-run steady state.
    pub initial_drive: f64,
    pub modes: Vec<NarmaMode>,
    pub cfg: NarmaConfig,
    pub channel: ChannelConfig,
}

pub fn narma(mut m: KvMap) -> Result<(NarmaRun, KvMap), Failure> {
    let d = NarmaConfig::default();
    let r = NarmaRun {
        length: kv(m.take_or("narma.length", 6000usize))?,
        warmup: kv(m.take_or("narma.warmup", 100usize))?,
        initial_drive: kv(m.take_or("narma.initial_drive", 0.5))?,
        modes: list_or(&mut m, "narma.modes", NarmaMode::ALL.to_vec())?,
        cfg: NarmaConfig {
            difficulty: kv(m.take_or("narma.difficulty", d.difficulty))?,
            monologue_depth: kv(m.take_or("narma.monologue_depth", d.monologue_depth))?,
            train_fraction: kv(m.take_or("narma.train_fraction", d.train_fraction))?,
            lambda: kv(m.take_or("narma.lambda", d.lambda))?,
            history: kv(m.take_or("narma.history", d.history))?,
        },
        channel: ChannelConfig::take_from(&mut m, narma_channel()).map_err(usage)?,
    };
    finish(m)?;
    r.cfg.validate().map_err(usage)?;
    if r.modes.is_empty() {
        return Err(usage("narma.modes must name at least one mode"));
    }
    if !(0.0..=1.0).contains(&r.initial_drive) {
        return Err(usage("narma.initial_drive must lie in [0, 1]"));
    }
    let mut echo = KvMap::default();
    echo.insert("narma.length", r.length);
    echo.insert("narma.warmup", r.warmup);
    echo.insert("narma.initial_drive", r.initial_drive);
    echo.insert("narma.modes", join(&r.modes));
    echo.insert("narma.difficulty", r.cfg.difficulty);
    echo.insert("narma.monologue_depth", r.cfg.monologue_depth);
    echo.insert("narma.train_fraction", r.cfg.train_fraction);
    echo.insert("narma.lambda", r.cfg.lambda);
    echo.insert("narma.history", r.cfg.history);
    r.channel.write_to(&mut echo);
    Ok((r, echo))
}

pub fn tpf(mut m: KvMap) -> Result<(TpfConfig, KvMap), Failure> {
    let d = TpfConfig::default();
    let c = TpfConfig {
        difficulty: kv(m.take_or("tpf.difficulty", d.difficulty))?,
        k: kv(m.take_or("tpf.k", d.k))?,
        train_jobs: kv(m.take_or("tpf.train_jobs", d.train_jobs))?,
        eval_jobs: kv(m.take_or("tpf.eval_jobs", d.eval_jobs))?,
        safety_keep_rate: kv(m.take_or("tpf.safety_keep_rate", d.safety_keep_rate))?,
        duty_block: kv(m.take_or("tpf.duty_block", d.duty_block))?,
        train: TrainParams {
            epochs: kv(m.take_or("tpf.epochs", d.train.epochs))?,
            batch_size: kv(m.take_or("tpf.batch_size", d.train.batch_size))?,
            learning_rate: kv(m.take_or("tpf.learning_rate", d.train.learning_rate))?,
            seed: d.train.seed,
        },
    };
    finish(m)?;
    let mut echo = KvMap::default();
    echo.insert("tpf.difficulty", c.difficulty);
    echo.insert("tpf.k", c.k);
    echo.insert("tpf.train_jobs", c.train_jobs);
    echo.insert("tpf.eval_jobs", c.eval_jobs);
    echo.insert("tpf.safety_keep_rate", c.safety_keep_rate);
    echo.insert("tpf.duty_block", c.duty_block);
    echo.insert("tpf.epochs", c.train.epochs);
    echo.insert("tpf.batch_size", c.train.batch_size);
    echo.insert("tpf.learning_rate", c.train.learning_rate);
    Ok((c, echo))
}

pub fn vbm(mut m: KvMap, seed: u64) -> Result<(LoopParams, KvMap), Failure> {
    let p = LoopParams::take_from(&mut m, LoopParams { seed, ..LoopParams::default() }).map_err(usage)?;
    finish(m)?;
    let mut echo = KvMap::default();
    p.write_to(&mut echo);
    Ok((p, echo))
}

pub fn puf(mut m: KvMap) -> Result<(PufConfig, KvMap), Failure> {
    let d = PufConfig::default();
    let c = PufConfig {
        challenges: kv(m.take_or("puf.challenges", d.challenges))?,
        samples_per_challenge: kv(m.take_or("puf.samples", d.samples_per_challenge))?,
        threshold: kv(m.take_or("puf.threshold", d.threshold))?,
        witness_tol: kv(m.take_or("puf.witness_tol", d.witness_tol))?,
        trials: kv(m.take_or("puf.trials", d.trials))?,
    };
    finish(m)?;
    let mut echo = KvMap::default();
    echo.insert("puf.challenges", c.challenges);
    echo.insert("puf.samples", c.samples_per_challenge);
    echo.insert("puf.threshold", c.threshold);
    echo.insert("puf.witness_tol", c.witness_tol);
    echo.insert("puf.trials", c.trials);
    Ok((c, echo))
}
