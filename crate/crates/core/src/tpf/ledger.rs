//! Energy and decision bookkeeping.

use super::TpfError;

/// Rounds in one full compression.
pub const ROUNDS_NOMINAL: u32 = 64;

/// Fraction of rounds saved by stopping every job after round `k` of `n`.
pub fn theoretical_savings(k: u32, n: u32) -> Result<f64, TpfError> {
    if n == 0 || k > n {
        return Err(TpfError::Rounds { k, n });
    }
    Ok(1.0 - k as f64 / n as f64)
}

/// Throughput multiplier when only `1 - savings` of the work is done.
pub fn equivalent_hashrate(savings: f64) -> Result<f64, TpfError> {
    if !(0.0..1.0).contains(&savings) {
        return Err(TpfError::Fraction(savings));
    }
    Ok(1.0 / (1.0 - savings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnergyLedger {
    pub n: u32,
    pub jobs: u64,
    pub aborted: u64,
    pub rounds_executed: u64,
    pub rounds_nominal: u64,
    /// Aborted jobs that would have met the target.
    pub false_aborts: u64,
}

impl EnergyLedger {
    pub fn new(n: u32) -> Self {
        Self { n, ..Self::default() }
    }

    /// Books one job that ran `executed` rounds.
    pub fn record(&mut self, executed: u32, aborted: bool, success: bool) {
        self.jobs += 1;
        self.rounds_executed += executed as u64;
        self.rounds_nominal += self.n as u64;
        if aborted {
            self.aborted += 1;
            self.false_aborts += success as u64;
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.rounds_executed <= self.rounds_nominal
            && self.false_aborts <= self.aborted
            && self.aborted <= self.jobs
            && self.rounds_nominal == self.jobs * self.n as u64
    }
}

/// `1 - executed / nominal`; zero for an empty ledger.
pub fn realized_savings(ledger: &EnergyLedger) -> f64 {
    if ledger.rounds_nominal == 0 {
        return 0.0;
    }
    1.0 - ledger.rounds_executed as f64 / ledger.rounds_nominal as f64
}

/// Counts indexed `[predicted][actual]`, class 0 = share, class 1 = no share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted_success: bool, actual_success: bool) {
        self.counts[!predicted_success as usize][!actual_success as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Predicted no share, was a share.
    pub fn false_aborts(&self) -> u64 {
        self.counts[1][0]
    }

    /// Predicted share, was not.
    pub fn missed_aborts(&self) -> u64 {
        self.counts[0][1]
    }

    pub fn is_diagonal(&self) -> bool {
        self.false_aborts() == 0 && self.missed_aborts() == 0
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (self.counts[0][0] + self.counts[1][1]) as f64 / t as f64
    }
}
