use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use splitree::experiments::{run_with, ExperimentConfig};
use splitree::fixpoint::{apply_t_seeded, EmpiricalDistribution};
use splitree::par::Execution;
use splitree::ModelSpec;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn replicas(c: &mut Criterion) {
    let bst = ModelSpec::bst();
    let cfg = ExperimentConfig::new("bst", vec![10_000], 64, 1);
    let mut group = c.benchmark_group("bst_replicas_n1e4");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_with(&cfg, &bst, exec).unwrap()));
    }
    group.finish();
}

fn smoothing_transform(c: &mut Criterion) {
    let bst = ModelSpec::bst();
    let input = EmpiricalDistribution::from_samples((0..100_000).map(|i| (i as f64 / 1e5) - 0.5).collect());
    let mut group = c.benchmark_group("apply_t_1e5");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| apply_t_seeded(&input, &bst, 0.5, 100_000, 7, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, replicas, smoothing_transform);
criterion_main!(benches);
