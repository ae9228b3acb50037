//! Subcommand bodies. Each one resolves its parameters, runs the
//! experiment and writes `<out>/<name>.csv`.

use std::fmt::Display;
use std::path::Path;

use anyhow::Context;
use silicon_core::infotheory::selftest;
use silicon_core::puf::{puf_study, PufError};
use silicon_core::report::{narma_table, puf_table, render_result, sweep_table, tpf_table, vbm_table, Manifest, Table};
use silicon_core::reservoir::{run_narma_benchmark, vfd_sweep, NarmaSeries, ReservoirError};
use silicon_core::row;
use silicon_core::tpf::{tpf_study, TpfError};
use silicon_core::vbm::{simulate_serial, simulate_vbm, throughput_gain};
use silicon_core::{ThermalState, Twin};

use crate::{config, Common, Failure};

pub fn run(name: &str, common: &Common) -> Result<(), Failure> {
    let kv = config::load_kv(common.config.as_deref())?;
    // The default sweep grid spans the s9 operating voltages.
    let default_profile = if name == "sweep" { "s9" } else { "lv06" };
    let profile = config::load_profile(common.profile.as_deref(), default_profile)?;
    let seed = common.seed;

    let mut manifest = Manifest::new(name, seed);
    for (k, v) in profile.to_kv().iter() {
        manifest.push(&format!("profile.{k}"), v);
    }

    match name {
        "selftest" => {
            let (cfg, echo) = config::selftest(kv, seed)?;
            manifest.push_config(&echo);
            let outcomes = selftest::run(&cfg);
            let mut t = Table::new(&["check", "cases", "violations", "worst", "tolerance", "passed"]);
            for o in &outcomes {
                t.push(row![o.name, o.cases, o.violations, o.worst, o.tolerance, o.passed()]);
            }
            write(common, name, &manifest, &t)?;
            let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.name).collect();
            if !failed.is_empty() {
                return Err(Failure::Invariant(format!("self-test failed: {}", failed.join(", "))));
            }
            println!("selftest: {} checks passed", outcomes.len());
        }
        "sweep" => {
            let (cfg, echo) = config::sweep(kv)?;
            manifest.push_config(&echo);
            let rows = vfd_sweep(&cfg, &profile, seed).map_err(reservoir_failure)?;
            write(common, name, &manifest, &sweep_table(&rows))?;
            for r in &rows {
                println!("{} V {} MHz D={}: cv {:.3} {}", r.voltage, r.frequency_mhz, r.difficulty, r.cv, r.regime);
            }
        }
        "narma" => {
            let (r, echo) = config::narma(kv)?;
            manifest.push_config(&echo);
            let series = NarmaSeries::generate(r.length, r.warmup, seed).map_err(reservoir_failure)?;
            let state = ThermalState::steady(&profile, r.initial_drive);
            let mut results = Vec::new();
            for &mode in &r.modes {
                let mut twin = Twin::new(profile.clone(), seed).map_err(usage)?.with_state(state);
                let res = run_narma_benchmark(mode, &mut twin, &r.channel, &series, &r.cfg, seed)
                    .map_err(reservoir_failure)?;
                println!("{mode}: nrmse {:.4}", res.nrmse);
                results.push(res);
            }
            write(common, name, &manifest, &narma_table(&results))?;
        }
        "tpf" => {
            let (cfg, echo) = config::tpf(kv)?;
            manifest.push_config(&echo);
            let study = tpf_study(&profile, &cfg, seed).map_err(tpf_failure)?;
            write(common, name, &manifest, &tpf_table(&study))?;
            let path = common.out.join("tpf_classifier.txt");
            std::fs::write(&path, study.policy.classifier.to_text())
                .with_context(|| format!("writing {}", path.display()))?;
            let verdict = if study.has_signal() { "signal" } else { "no signal" };
            println!(
                "tpf: {verdict} (advantage {:.4}, sigma {:.4}), savings {:.4}, false aborts {}",
                study.advantage, study.sigma, study.realized_savings, study.run.ledger.false_aborts
            );
        }
        "vbm" => {
            let (p, echo) = config::vbm(kv, seed)?;
            manifest.push_config(&echo);
            let serial = simulate_serial(&p).map_err(usage)?;
            let vbm = simulate_vbm(&p).map_err(usage)?;
            write(common, name, &manifest, &vbm_table(&serial, &vbm))?;
            println!("vbm: throughput gain {:.4}", throughput_gain(&serial, &vbm));
        }
        "puf" => {
            let (cfg, echo) = config::puf(kv)?;
            manifest.push_config(&echo);
            let report = puf_study(&profile, &cfg, seed).map_err(puf_failure)?;
            write(common, name, &manifest, &puf_table(&report))?;
            println!(
                "puf: genuine accept {:.3}, impostor reject {:.3}, witness {:.3}",
                report.accept_rate(),
                report.reject_rate(),
                report.witness_rate()
            );
        }
        other => return Err(Failure::Usage(format!("unknown experiment {other}"))),
    }
    Ok(())
}

fn write(common: &Common, name: &str, manifest: &Manifest, table: &Table) -> Result<(), Failure> {
    let dir: &Path = &common.out;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, render_result(manifest, table)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn reservoir_failure(e: ReservoirError) -> Failure {
    match e {
        ReservoirError::Invalid(_) | ReservoirError::InputRange(_) => usage(e),
        ReservoirError::Diverged { .. } => Failure::Invariant(e.to_string()),
        other => Failure::Runtime(other.into()),
    }
}

fn tpf_failure(e: TpfError) -> Failure {
    match e {
        TpfError::BoundViolated { .. } => Failure::Invariant(e.to_string()),
        TpfError::Rounds { .. } | TpfError::Fraction(_) | TpfError::Config(_) => usage(e),
        other => Failure::Runtime(other.into()),
    }
}

fn puf_failure(e: PufError) -> Failure {
    match e {
        PufError::Invalid(_) | PufError::UnderSampled { .. } => usage(e),
        other => Failure::Runtime(other.into()),
    }
}
