use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use silicon_bench::{examples, jobs, ridge_problem, template, twin};
use silicon_core::reservoir::{ridge_fit, FeatureMatrix};
use silicon_core::sha_twin::{double_sha_header, evaluate_job, ShareConvention};
use silicon_core::swh::run_swh_session;
use silicon_core::tpf::{classify, train_classifier, TrainParams};
use silicon_core::ChannelConfig;

fn hashing(c: &mut Criterion) {
    let header = template().with_nonce(0);
    c.bench_function("sha256d_header", |b| b.iter(|| double_sha_header(black_box(&header))));
    let job = jobs(1, 16.0).remove(0);
    c.bench_function("evaluate_job", |b| b.iter(|| evaluate_job(black_box(&job), ShareConvention::Desk).unwrap()));
}

fn twin_steps(c: &mut Criterion) {
    let js = jobs(64, 16.0);
    c.bench_function("twin_64_jobs", |b| {
        b.iter_batched(
            twin,
            |mut t| {
                for j in &js {
                    black_box(t.run_job(j, 128).unwrap());
                }
            },
            BatchSize::SmallInput,
        )
    });
    let channel = ChannelConfig::lan();
    c.bench_function("swh_session_64", |b| {
        b.iter_batched(twin, |mut t| run_swh_session(&mut t, &channel, 64, 16.0, 1).unwrap(), BatchSize::SmallInput)
    });
}

fn readouts(c: &mut Criterion) {
    let (x, y) = ridge_problem(4000, 12);
    let m = FeatureMatrix::from_rows(&x).unwrap();
    c.bench_function("ridge_4000x12", |b| b.iter(|| ridge_fit(black_box(&m), &y, 1e-6).unwrap()));

    let data = examples(2000, 5);
    let hp = TrainParams { epochs: 5, ..TrainParams::default() };
    let trained = train_classifier(&data, &hp).unwrap().classifier;
    c.bench_function("classify", |b| b.iter(|| classify(&trained, black_box(&data[7].0)).unwrap()));
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    g.bench_function("train_2000x5_epochs", |b| b.iter(|| train_classifier(&data, &hp).unwrap()));
    g.finish();
}

criterion_group!(benches, hashing, twin_steps, readouts);
criterion_main!(benches);
