use proptest::prelude::*;

use silicon_core::tpf::equivalent_hashrate;
use silicon_core::vbm::{combined_savings, simulate_serial, simulate_vbm, throughput_gain};
use silicon_core::{LoopParams, MiningLoopStats};

fn params() -> impl Strategy<Value = LoopParams> {
    (1_000u64..20_000_000, 0u64..10_000_000, 0.0f64..3_000_000.0, 0u64..2_000_000, 2usize..5, any::<u64>()).prop_map(
        |(t_hash_ns, t_network_ns, network_jitter_ns, t_stratum_ns, buffer_depth, seed)| LoopParams {
            t_hash_ns,
            t_network_ns,
            network_jitter_ns,
            t_stratum_ns,
            duration_ns: 500_000_000,
            buffer_depth,
            seed,
        },
    )
}

/// Busy time is whole units plus at most one partial unit at the cutoff.
fn hashes_at_full_speed(s: &MiningLoopStats, t_hash: u64) -> bool {
    s.busy_ns >= s.units * t_hash && s.busy_ns < (s.units + 1) * t_hash && s.busy_ns + s.idle_ns == s.wall_ns
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prefetch_dominates_and_is_hashrate_neutral(p in params()) {
        let s = simulate_serial(&p).unwrap();
        let v = simulate_vbm(&p).unwrap();
        prop_assert!(v.efficiency >= s.efficiency);
        prop_assert!(v.units >= s.units);
        prop_assert!(hashes_at_full_speed(&s, p.t_hash_ns));
        prop_assert!(hashes_at_full_speed(&v, p.t_hash_ns));
        prop_assert_eq!(simulate_vbm(&p).unwrap(), v);
    }
}

#[test]
fn dominance_on_a_grid() {
    for t_hash in [500_000u64, 2_000_000, 5_000_000, 8_000_000, 20_000_000] {
        for over in [0u64, 1_000_000, 2_000_000, 5_000_000, 12_000_000] {
            let p = LoopParams {
                t_hash_ns: t_hash,
                t_network_ns: over,
                network_jitter_ns: over as f64 / 4.0,
                seed: t_hash + over,
                ..LoopParams::default()
            };
            assert!(simulate_vbm(&p).unwrap().efficiency >= simulate_serial(&p).unwrap().efficiency);
        }
    }
}

#[test]
fn quarter_overhead_gives_quarter_gain() {
    let p = LoopParams::default();
    assert_eq!(p.overhead_ns() * 4, p.t_hash_ns);
    let gain = throughput_gain(&simulate_serial(&p).unwrap(), &simulate_vbm(&p).unwrap());
    assert!((gain - 0.25).abs() < 0.01, "{gain}");
}

#[test]
fn combined_limit() {
    let c = combined_savings(0.92, 0.25).unwrap();
    assert!((c - 0.94).abs() < 5e-4);
    let h = equivalent_hashrate(c).unwrap();
    assert!((h - 16.7).abs() < 0.05, "{h}");
    assert!(combined_savings(1.0, 0.1).is_err());
}
