//! Fixtures shared by the benchmarks. Everything derives from a fixed seed
//! so runs compare like with like.

use silicon_core::rng::{purpose, stream};
use silicon_core::sha_twin::{HeaderTemplate, Job};
use silicon_core::tpf::Example;
use silicon_core::{DeviceProfile, LeakMode, ThermalState, Twin};

pub const SEED: u64 = 0x5eed;

pub fn template() -> HeaderTemplate {
    HeaderTemplate::random(&mut stream(SEED, purpose::TEMPLATE))
}

pub fn jobs(n: u64, difficulty: f64) -> Vec<Job> {
    let t = template();
    (0..n).map(|i| Job::new(t, Job::extranonce2_for(0, i), difficulty)).collect()
}

/// A leaky lv06 twin at its idle steady state.
pub fn twin() -> Twin {
    let p = DeviceProfile::lv06().with_leak(LeakMode::Leaky);
    let s = ThermalState::steady(&p, 0.0);
    Twin::new(p, SEED).expect("preset is valid").with_state(s)
}

/// Early-round examples from the leaky twin at decision round `k`.
pub fn examples(n: u64, k: u32) -> Vec<Example> {
    let mut t = twin();
    jobs(n, 16.0)
        .iter()
        .map(|j| {
            let out = t.run_job(j, k).expect("valid round count");
            let x =
                silicon_core::sha_twin::raw_features(&out.sample, t.profile(), k as usize).expect("valid round count");
            (x, out.eval.success)
        })
        .collect()
}

/// Ridge design with `cols` columns: a noisy linear target plus bias.
pub fn ridge_problem(rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    use rand::Rng;
    let mut rng = stream(SEED, purpose::SPLIT);
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            let mut r: Vec<f64> = (0..cols - 1).map(|_| rng.random::<f64>()).collect();
            r.push(1.0);
            r
        })
        .collect();
    let y = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(i, v)| v * i as f64).sum::<f64>() + rng.random::<f64>() * 0.01)
        .collect();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_stable() {
        assert_eq!(jobs(3, 1.0), jobs(3, 1.0));
        let e = examples(200, 5);
        assert_eq!(e.len(), 200);
        assert!(e.iter().any(|x| x.1) && e.iter().any(|x| !x.1));
        let (x, y) = ridge_problem(50, 4);
        assert_eq!((x.len(), x[0].len(), y.len()), (50, 4, 50));
    }
}
