use proptest::prelude::*;

use silicon_core::sha_twin::HeaderTemplate;
use silicon_core::tpf::{
    realized_savings, run_tpf_experiment, theoretical_savings, tpf_study, AbortPolicy, ConfusionMatrix, EnergyLedger,
    TpfConfig, ROUNDS_NOMINAL,
};
use silicon_core::{DeviceProfile, LeakMode, ThermalState, Twin};

proptest! {
    #[test]
    fn no_ledger_beats_the_round_bound(k in 1u32..=64, jobs in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..300)) {
        let bound = theoretical_savings(k, ROUNDS_NOMINAL).unwrap();
        let mut ledger = EnergyLedger::new(ROUNDS_NOMINAL);
        for (abort, success) in jobs {
            ledger.record(if abort { k } else { ROUNDS_NOMINAL }, abort, success);
            prop_assert!(ledger.is_consistent());
            prop_assert!(realized_savings(&ledger) <= bound + 1e-12);
        }
    }

    #[test]
    fn diagonal_iff_no_errors(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..200)) {
        let mut m = ConfusionMatrix::default();
        for (p, a) in &pairs {
            m.record(*p, *a);
        }
        prop_assert_eq!(m.is_diagonal(), m.false_aborts() == 0 && m.missed_aborts() == 0);
        prop_assert_eq!(m.total(), pairs.len() as u64);
    }
}

fn small() -> TpfConfig {
    TpfConfig { train_jobs: 1500, eval_jobs: 600, difficulty: 16.0, ..TpfConfig::default() }
}

#[test]
fn raising_theta_never_reduces_aborts() {
    let s = tpf_study(&DeviceProfile::lv06().with_leak(LeakMode::Leaky), &small(), 3).unwrap();
    let scores: Vec<f64> = s.run.records.iter().map(|r| r.score).collect();
    let mut last = 0;
    for i in 0..=20 {
        let p = AbortPolicy { theta: i as f64 / 20.0, ..s.policy.clone() };
        let aborts = scores.iter().filter(|x| p.would_abort(**x)).count();
        assert!(aborts >= last);
        last = aborts;
    }
}

#[test]
fn leaky_device_yields_a_clean_filter() {
    let s = tpf_study(&DeviceProfile::lv06().with_leak(LeakMode::Leaky), &small(), 5).unwrap();
    assert!(s.final_loss < s.initial_loss);
    assert!(s.run.confusion.is_diagonal(), "{:?}", s.run.confusion);
    assert_eq!(s.run.ledger.false_aborts, 0);
    assert!(s.realized_savings > 0.8 && s.realized_savings <= s.theoretical_savings);
    assert!(s.has_signal());
}

#[test]
fn null_device_yields_no_signal() {
    let s = tpf_study(&DeviceProfile::lv06(), &small(), 5).unwrap();
    assert!(!s.has_signal());
    assert!(s.certificate.is_none());
    assert_eq!(s.run.ledger.aborted, 0);
}

#[test]
fn full_safety_keep_executes_everything() {
    let s = tpf_study(&DeviceProfile::lv06().with_leak(LeakMode::Leaky), &small(), 6).unwrap();
    let policy = AbortPolicy { safety_keep_rate: 1.0, ..s.policy.clone() };
    let p = DeviceProfile::lv06().with_leak(LeakMode::Leaky);
    let mut twin = Twin::new(p.clone(), 1).unwrap().with_state(ThermalState::steady(&p, 0.0));
    let template = HeaderTemplate::random(&mut silicon_core::rng::stream(1, 0));
    let run = run_tpf_experiment(&mut twin, &policy, template, 16.0, 0, 300, 1).unwrap();
    assert_eq!(run.ledger.aborted, 0);
    assert_eq!(realized_savings(&run.ledger), 0.0);
    assert_eq!(run.bound_checks, 300);
}
