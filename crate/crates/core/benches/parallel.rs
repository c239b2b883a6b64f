//! Rayon pool vs a single worker on the batch-heavy stages.
//!
//! `cargo bench -p txclass --bench parallel`. A `--no-default-features`
//! build runs the same code on plain iterators.

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

use txclass::corpus::{generate_synthetic, split_dataset};
use txclass::features::{vectorize, FeatureVector};
use txclass::pipeline::classify_batch;
use txclass::svm::{train_ovo, TrainConfig};
use txclass::{preprocess, train_pipeline, CategoryId, Config, GazetteerConfig, SynthConfig};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut out = vec![("1-thread".to_string(), ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if threads > 1 {
        out.push((format!("{threads}-threads"), ThreadPoolBuilder::new().num_threads(threads).build().unwrap()));
    }
    out
}

fn bench(c: &mut Criterion) {
    let data = generate_synthetic(&SynthConfig::reference(100, 0.6, 1)).unwrap();
    let (train, test) = split_dataset(&data, 0.7, 1).unwrap();
    let g = GazetteerConfig::default();
    let cfg = Config::default();
    let (bundle, _) = train_pipeline(&train, &g, &cfg).unwrap();
    let vectors: Vec<(FeatureVector, CategoryId)> = train
        .records
        .iter()
        .map(|r| (vectorize(&bundle.vectorizer, r, &preprocess(&r.description, &g)), r.category.unwrap()))
        .collect();
    let dimension = bundle.vectorizer.dimension();

    let mut group = c.benchmark_group("train_ovo");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| train_ovo(&vectors, &train.categories, dimension, &TrainConfig::default()).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("classify_batch");
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter_batched(
                || test.records.clone(),
                |records| pool.install(|| classify_batch(&bundle, &g, &records).unwrap()),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
