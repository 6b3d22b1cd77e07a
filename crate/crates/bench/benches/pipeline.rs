use assassin_bench::{dataset, eligible_games};
use assassin_core::eval::{cross_validate_dataset, kfold_split, TrainerSpec};
use assassin_core::features::build_dataset;
use assassin_core::sim::{simulate_dataset, SimConfig};
use assassin_core::svm::{train_linear_svc, train_rbf_svc, LinearSvcParams, RbfSvcParams};
use assassin_core::{FeatureSpec, StatSet};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.throughput(Throughput::Elements(1000));
    group.bench_function("1000 games", |b| {
        b.iter(|| {
            simulate_dataset(black_box(&SimConfig {
                num_games: 1000,
                ..SimConfig::default()
            }))
            .unwrap()
        })
    });
    group.finish();
}

fn bench_features(c: &mut Criterion) {
    let stream = eligible_games(1000, 1);
    let mut group = c.benchmark_group("featurize");
    group.throughput(Throughput::Elements(stream.len() as u64));
    let full = FeatureSpec::Engineered {
        subset: StatSet::FULL,
        clean_rule: Default::default(),
    };
    for (name, spec) in [("engineered", full), ("general", FeatureSpec::General)] {
        group.bench_function(name, |b| {
            b.iter(|| build_dataset(black_box(&stream), &spec).unwrap())
        });
    }
    group.finish();
}

fn bench_linear_svc(c: &mut Criterion) {
    let mut group = c.benchmark_group("linear_svc");
    for games in [500, 2000] {
        let ds = dataset(games, 2, &FeatureSpec::default());
        group.bench_with_input(BenchmarkId::from_parameter(games), &ds, |b, ds| {
            b.iter(|| train_linear_svc(&ds.x, &ds.labels, &LinearSvcParams::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_rbf_svc(c: &mut Criterion) {
    let mut group = c.benchmark_group("rbf_svc_smo");
    group.sample_size(10);
    for games in [200, 600] {
        let ds = dataset(games, 3, &FeatureSpec::default());
        group.bench_with_input(BenchmarkId::from_parameter(games), &ds, |b, ds| {
            b.iter(|| train_rbf_svc(&ds.x, &ds.labels, &RbfSvcParams::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_cross_validation(c: &mut Criterion) {
    let ds = dataset(2000, 4, &FeatureSpec::default());
    let plan = kfold_split(ds.len(), 10, 0).unwrap();
    let trainer = TrainerSpec::LinearSvc(LinearSvcParams::default());
    c.bench_function("cv_10_fold_2000_games", |b| {
        b.iter(|| cross_validate_dataset(&ds, &trainer, &plan).unwrap())
    });
}

criterion_group!(
    benches,
    bench_simulate,
    bench_features,
    bench_linear_svc,
    bench_rbf_svc,
    bench_cross_validation
);
criterion_main!(benches);
