use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hcm::catalog;
use hcm::exploration::component_sizes;
use hcm::generator::{generate, SequenceMode};
use hcm::parallel::map_indexed_sequential;
use hcm::rng::derive_seed;

const REPLICAS: usize = 32;

fn replica(n: usize, r: usize) -> u64 {
    let g = generate(&catalog::household_critical(), n, SequenceMode::Iid, derive_seed(0, &[r as u64])).unwrap();
    component_sizes(&g)[0]
}

fn bench_replicas(c: &mut Criterion) {
    let mut group = c.benchmark_group("largest-component replicas");
    group.sample_size(10);
    for n in [10_000usize, 50_000] {
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| map_indexed_sequential(REPLICAS, |r| replica(n, r)))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| hcm::parallel::map_indexed_parallel(REPLICAS, |r| replica(n, r)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_replicas);
criterion_main!(benches);
