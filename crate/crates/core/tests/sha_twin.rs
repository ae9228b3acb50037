use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use silicon_core::sha_twin::{
    conditional_success_estimate, diff1_target, double_sha_header, sha256, sha256::IV, sha256_with_trace, sha256d,
    target_for, BlockHeader, EarlyBucket, HeaderTemplate, Job, ShareConvention,
};
use silicon_core::{DeviceProfile, LeakMode, ThermalState, Twin};

fn oracle(m: &[u8]) -> [u8; 32] {
    Sha256::digest(m).into()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn digest_matches_reference(m in proptest::collection::vec(any::<u8>(), 0..300)) {
        prop_assert_eq!(sha256(&m), oracle(&m));
        prop_assert_eq!(sha256d(&m), oracle(&oracle(&m)));
    }

    #[test]
    fn traced_single_block_matches_reference(m in proptest::collection::vec(any::<u8>(), 0..56)) {
        let mut block = m.clone();
        block.push(0x80);
        block.resize(56, 0);
        block.extend_from_slice(&((m.len() as u64) * 8).to_be_bytes());
        let (digest, trace) = sha256_with_trace(&block, &IV).unwrap();
        prop_assert_eq!(digest, oracle(&m));
        prop_assert_eq!(trace.rounds.len(), 64);
    }

    #[test]
    fn header_round_trip(bytes in proptest::array::uniform32(any::<u8>()), tail in proptest::collection::vec(any::<u8>(), 48)) {
        let mut raw = [0u8; 80];
        raw[..32].copy_from_slice(&bytes);
        raw[32..].copy_from_slice(&tail);
        let h = BlockHeader::deserialize(&raw);
        prop_assert_eq!(h.serialize(), raw);
        prop_assert_eq!(double_sha_header(&h), oracle(&oracle(&raw)));
    }
}

#[test]
fn known_answer_digests() {
    let hex = |d: [u8; 32]| d.iter().map(|b| format!("{b:02x}")).collect::<String>();
    assert_eq!(hex(sha256(b"abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    assert_eq!(hex(sha256(b"")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    assert_eq!(sha256(b"abc"), oracle(b"abc"));
}

#[test]
fn nonce_change_avalanche() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = BlockHeader::genesis();
    let base = double_sha_header(&h);
    let mut flipped = 0u32;
    for _ in 0..1000 {
        let mut g = h;
        g.nonce ^= 1 << rng.random_range(0..32);
        flipped += base.iter().zip(double_sha_header(&g)).map(|(a, b)| (a ^ b).count_ones()).sum::<u32>();
    }
    let mean = flipped as f64 / 256_000.0;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn diff1_division_oracle() {
    let d1 = diff1_target();
    assert_eq!(target_for(ShareConvention::Diff1, 1.0).unwrap(), d1);
    assert_eq!(target_for(ShareConvention::Diff1, 2.0).unwrap(), &d1 / 2u32);
    assert_eq!(target_for(ShareConvention::Diff1, 1024.0).unwrap(), &d1 >> 10);
    assert_eq!(target_for(ShareConvention::Diff1, 3.0).unwrap(), &d1 / BigUint::from(3u8));
}

#[test]
fn desk_acceptance_rate_at_difficulty_16() {
    let template = HeaderTemplate::random(&mut ChaCha8Rng::seed_from_u64(8));
    let n = 100_000u64;
    let hits = (0..n)
        .filter(|&i| {
            silicon_core::sha_twin::evaluate_job(&Job::new(template, i, 16.0), ShareConvention::Desk).unwrap().success
        })
        .count();
    let p = 1.0 / 16.0;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((hits as f64 - n as f64 * p).abs() < 3.0 * sigma, "{hits}");
}

#[test]
fn conditional_estimates() {
    let any = conditional_success_estimate(EarlyBucket::Any, 1.0, 1000, ShareConvention::Desk, 1).unwrap();
    assert_eq!(any.probability, 1.0);

    let n = 60_000;
    let p = conditional_success_estimate(EarlyBucket::Any, 256.0, n, ShareConvention::Desk, 2).unwrap();
    let sigma = (1.0 / 256.0 * (255.0 / 256.0) / n as f64).sqrt();
    assert!((p.probability - 1.0 / 256.0).abs() < 3.0 * sigma, "{p:?}");

    // Same seed, same draws: the two disjoint buckets partition the total.
    let lo = conditional_success_estimate(
        EarlyBucket::Popcount { round: 5, lo: 0, hi: 15 },
        256.0,
        n,
        ShareConvention::Desk,
        2,
    )
    .unwrap();
    let hi = conditional_success_estimate(
        EarlyBucket::Popcount { round: 5, lo: 16, hi: 32 },
        256.0,
        n,
        ShareConvention::Desk,
        2,
    )
    .unwrap();
    assert_eq!(lo.in_bucket + hi.in_bucket, n as u64);
    let mixed = (lo.probability * lo.in_bucket as f64 + hi.probability * hi.in_bucket as f64) / n as f64;
    assert!((mixed - p.probability).abs() < 3.0 * p.std_error.max(1e-12));
}

fn job(template: HeaderTemplate, i: u64, drive: f64) -> Job {
    Job::new(template, Job::extranonce2_for(Job::payload_for_drive(drive), i), 64.0)
}

#[test]
fn echo_state_property() {
    let p = DeviceProfile::lv06();
    let template = HeaderTemplate::random(&mut ChaCha8Rng::seed_from_u64(1));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let jobs: Vec<Job> = (0..500).map(|i| job(template, i, rng.random())).collect();
    let cold = ThermalState::ambient(&p);
    let hot = ThermalState { temperature: cold.temperature + 50.0, ..cold };
    let mut a = Twin::new(p.clone(), 1).unwrap().with_state(cold);
    let mut b = Twin::new(p, 1).unwrap().with_state(hot);
    for j in &jobs {
        a.run_job(j, 128).unwrap();
        b.run_job(j, 128).unwrap();
    }
    assert!((a.state().temperature - b.state().temperature).abs() < 1e-6);
}

#[test]
fn fading_memory() {
    let p = DeviceProfile::lv06().with_leak(LeakMode::Leaky);
    let keep = 1.0 - p.thermal_decay;
    let template = HeaderTemplate::random(&mut ChaCha8Rng::seed_from_u64(4));
    let n = 40u64;
    let run = |perturb: Option<u64>| {
        let mut t = Twin::new(p.clone(), 9).unwrap();
        for i in 0..n {
            let drive = if Some(i) == perturb { 1.0 } else { 0.3 };
            t.run_job(&job(template, i, drive), 128).unwrap();
        }
        t.observe(&job(template, n, 0.3), 128).unwrap().delta_t_exact
    };
    let base = run(None);
    let gap = |tau: u64| (run(Some(n - tau)) - base).abs();
    let c = gap(1) / keep;
    assert!(c > 0.0);
    for tau in [1, 5, 10, 20] {
        assert!(gap(tau) <= c * keep.powi(tau as i32) * (1.0 + 1e-6) + 1e-9, "tau {tau}: {}", gap(tau));
    }
}

#[test]
fn simulation_is_a_pure_function_of_inputs() {
    let template = HeaderTemplate::random(&mut ChaCha8Rng::seed_from_u64(5));
    let trace = |seed: u64| {
        let mut t = Twin::new(DeviceProfile::s9().with_leak(LeakMode::Leaky), seed).unwrap();
        (0..50).map(|i| t.run_job(&job(template, i, 0.5), 128).unwrap().sample).collect::<Vec<_>>()
    };
    assert_eq!(trace(1), trace(1));
    assert_ne!(trace(1), trace(2));
}

#[test]
fn devices_differ_by_id() {
    let template = HeaderTemplate::random(&mut ChaCha8Rng::seed_from_u64(6));
    let trace = |id: u64| {
        let mut t = Twin::new(DeviceProfile::lv06().with_device_id(id), 0).unwrap();
        (0..100).map(|i| t.run_job(&job(template, i, 0.5), 128).unwrap().sample.delta_t_ns).collect::<Vec<_>>()
    };
    let (a, b) = (trace(1), trace(2));
    assert!(a.iter().zip(&b).filter(|(x, y)| x != y).count() > 90);
}

fn point_biserial(xs: &[f64], labels: &[bool]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let ones: Vec<f64> = xs.iter().zip(labels).filter(|(_, l)| **l).map(|(x, _)| *x).collect();
    let zeros: Vec<f64> = xs.iter().zip(labels).filter(|(_, l)| !**l).map(|(x, _)| *x).collect();
    let p = ones.len() as f64 / n;
    let m1 = ones.iter().sum::<f64>() / ones.len() as f64;
    let m0 = zeros.iter().sum::<f64>() / zeros.len() as f64;
    (m1 - m0) / sd * (p * (1.0 - p)).sqrt()
}

/// Early-round timing feature and share label over `n` jobs at `k` rounds.
fn early_samples(mode: LeakMode, n: u64, k: u32) -> (Vec<f64>, Vec<bool>) {
    let p = DeviceProfile::lv06().with_leak(mode);
    let state = ThermalState::steady(&p, 0.0);
    let mut t = Twin::new(p.clone(), 12).unwrap().with_state(state);
    let template = HeaderTemplate::random(&mut ChaCha8Rng::seed_from_u64(7));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let j = Job::new(template, Job::extranonce2_for(0, i), 16.0);
        let out = t.observe(&j, k).unwrap();
        xs.push(out.sample.delta_t_ns as f64 / k as f64);
        ys.push(out.eval.success);
        t.advance(128, 0.0);
    }
    (xs, ys)
}

#[test]
fn null_mode_timing_is_uncorrelated_with_success() {
    let (xs, ys) = early_samples(LeakMode::Null, 10_000, 128);
    let r = point_biserial(&xs, &ys);
    assert!(r.abs() < 3.0 / 100.0, "{r}");
    let (xs, ys) = early_samples(LeakMode::Null, 10_000, 5);
    let r5 = point_biserial(&xs, &ys);
    assert!(r5.abs() < 0.03, "{r5} {:?}", &xs[..5]);
}

#[test]
fn leaky_early_features_predict_success() {
    let (xs, ys) = early_samples(LeakMode::Leaky, 10_000, 5);
    let r = point_biserial(&xs, &ys);
    assert!(r.abs() > 0.3, "{r}");
}
