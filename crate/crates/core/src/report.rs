//! Result files: a `# key: value` manifest followed by a CSV table.

use std::fmt::Display;

use crate::kv::KvMap;
use crate::puf::PufReport;
use crate::reservoir::{NarmaResult, SweepRow};
use crate::tpf::TpfStudy;
use crate::vbm::MiningLoopStats;

/// Ordered header lines that, together with the named profile, re-create a
/// run exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64) -> Self {
        let mut m = Self::default();
        m.push("tool", "silicon-lab");
        m.push("version", crate::VERSION);
        m.push("experiment", experiment);
        m.push("seed", seed);
        m
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Echoes a config map as `config.<key>` entries in key order.
    pub fn push_config(&mut self, kv: &KvMap) {
        for (k, v) in kv.iter() {
            self.push(&format!("config.{k}"), v);
        }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Panics if the row width differs from the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Builds a row from displayable cells.
#[macro_export]
macro_rules! row {
    ($($cell:expr),* $(,)?) => { vec![$($cell.to_string()),*] };
}

pub fn render_result(manifest: &Manifest, table: &Table) -> String {
    let mut out = manifest.render();
    out.push_str(&table.render());
    out
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t =
        Table::new(&["voltage", "frequency_mhz", "difficulty", "entropy", "cv", "regime", "samples", "windows"]);
    for r in rows {
        t.push(row![r.voltage, r.frequency_mhz, r.difficulty, r.entropy, r.cv, r.regime, r.samples, r.windows]);
    }
    t
}

pub fn narma_table(results: &[NarmaResult]) -> Table {
    let mut t = Table::new(&["mode", "nrmse", "one_minus_nrmse", "train_rows", "test_rows"]);
    for r in results {
        t.push(row![r.mode, r.nrmse, r.improvement, r.train_rows, r.test_rows]);
    }
    t
}

pub fn tpf_table(s: &TpfStudy) -> Table {
    let l = &s.run.ledger;
    let c = &s.run.confusion.counts;
    let mut t = Table::new(&["metric", "value"]);
    let signal = if s.has_signal() { "signal" } else { "no signal" };
    let cert =
        s.certificate.as_ref().map_or("absent".to_string(), |c| format!("gap={} cell_gap={}", c.gap, c.cell_gap));
    for (k, v) in [
        ("signal", signal.to_string()),
        ("decision_round", s.policy.k.to_string()),
        ("theta", s.policy.theta.to_string()),
        ("safety_keep_rate", s.policy.safety_keep_rate.to_string()),
        ("jobs", l.jobs.to_string()),
        ("aborted", l.aborted.to_string()),
        ("false_aborts", l.false_aborts.to_string()),
        ("rounds_executed", l.rounds_executed.to_string()),
        ("rounds_nominal", l.rounds_nominal.to_string()),
        ("realized_savings", s.realized_savings.to_string()),
        ("theoretical_savings", s.theoretical_savings.to_string()),
        ("bound_checks", s.run.bound_checks.to_string()),
        ("confusion_pred_share_actual_share", c[0][0].to_string()),
        ("confusion_pred_share_actual_none", c[0][1].to_string()),
        ("confusion_pred_none_actual_share", c[1][0].to_string()),
        ("confusion_pred_none_actual_none", c[1][1].to_string()),
        ("accuracy", s.accuracy.to_string()),
        ("baseline", s.baseline.to_string()),
        ("advantage", s.advantage.to_string()),
        ("sigma", s.sigma.to_string()),
        ("initial_loss", s.initial_loss.to_string()),
        ("final_loss", s.final_loss.to_string()),
        ("certificate", cert),
    ] {
        t.push(vec![k.to_string(), v]);
    }
    t
}

pub fn vbm_table(serial: &MiningLoopStats, vbm: &MiningLoopStats) -> Table {
    let mut t = Table::new(&["mode", "wall_ns", "busy_ns", "idle_ns", "units", "rate_per_s", "efficiency", "gain"]);
    let gain = crate::vbm::throughput_gain(serial, vbm);
    for (s, g) in [(serial, 0.0), (vbm, gain)] {
        t.push(row![s.mode, s.wall_ns, s.busy_ns, s.idle_ns, s.units, s.rate_per_s, s.efficiency, g]);
    }
    t
}

pub fn puf_table(r: &PufReport) -> Table {
    let mut t = Table::new(&[
        "trial",
        "genuine_statistic",
        "genuine_accept",
        "impostor_statistic",
        "impostor_accept",
        "witness_bucket",
        "witness_bin",
        "witness_gap",
        "replay_gap",
    ]);
    for (i, tr) in r.trials.iter().enumerate() {
        let (b, bin, gap) = tr.witness.map_or((String::new(), String::new(), String::new()), |w| {
            (w.bucket.to_string(), w.bin.to_string(), w.gap.to_string())
        });
        t.push(row![
            i,
            tr.genuine.statistic,
            tr.genuine.accept,
            tr.impostor.statistic,
            tr.impostor.accept,
            b,
            bin,
            gap,
            tr.replay_gap.map_or(String::new(), |g| g.to_string())
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_then_table() {
        let mut m = Manifest::new("demo", 7);
        let mut kv = KvMap::default();
        kv.insert("b", 2);
        kv.insert("a", 1);
        m.push_config(&kv);
        let mut t = Table::new(&["x", "y"]);
        t.push(row![1, 0.5]);
        let text = render_result(&m, &t);
        assert!(text.starts_with("# tool: silicon-lab\n# version: "));
        assert!(text.contains("# seed: 7\n# config.a: 1\n# config.b: 2\nx,y\n1,0.5\n"));
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_panic() {
        Table::new(&["x"]).push(row![1, 2]);
    }
}
