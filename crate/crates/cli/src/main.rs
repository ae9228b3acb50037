//! `silicon-lab`: runs one experiment per invocation and writes a result
//! file (manifest block plus CSV table) into the output directory.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 invariant violation.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "silicon-lab", version, about = "Mining-ASIC timing reservoir experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Numerical check of the information-theory identities.
    Selftest(Common),
    /// Voltage/frequency/difficulty grid of timing entropy and CV.
    Sweep(Common),
    /// NARMA-10 readout in dialogue, monologue and constant modes.
    Narma(Common),
    /// Early-abort filter: train, calibrate, evaluate, certify.
    Tpf(Common),
    /// Serial versus prefetching mining loop.
    Vbm(Common),
    /// Timing-profile enrollment and verification trials.
    Puf(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment seed; every random draw derives from it.
    #[arg(long)]
    pub seed: u64,
    /// `key=value` file with experiment parameters. Unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for result files.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Device preset (s9, lv06, lbbox) or path to a profile file.
    #[arg(long)]
    pub profile: Option<String>,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Invariant(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Selftest(c) => ("selftest", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Narma(c) => ("narma", c),
        Command::Tpf(c) => ("tpf", c),
        Command::Vbm(c) => ("vbm", c),
        Command::Puf(c) => ("puf", c),
    };
    match run::run(name, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("silicon-lab: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(m)) => {
            eprintln!("silicon-lab: invariant violated: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("silicon-lab: {e:#}");
            ExitCode::from(1)
        }
    }
}
