use c2_bench::{indexes, interval_counts, intervals, table};
use c2_core::{annotate, EstimatorConfig};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn interval_queries(c: &mut Criterion) {
    let mut group = c.benchmark_group("count_intersecting");
    for n in [1_000, 10_000, 100_000] {
        let counts = interval_counts(n, 1);
        let queries = intervals(1_000, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &queries, |b, qs| {
            b.iter(|| qs.iter().map(|&(lo, hi)| counts.count_intersecting(lo, hi)).sum::<usize>())
        });
    }
    group.finish();
}

fn annotate_table(c: &mut Criterion) {
    let entities = 100_000;
    let idx = indexes(entities, 3);
    let config = EstimatorConfig::default();
    let mut group = c.benchmark_group("annotate");
    group.sample_size(10);
    for rows in [100, 1_000] {
        let t = table(entities, 10, rows, 4);
        group.bench_with_input(BenchmarkId::new("10_columns", rows), &t, |b, t| {
            b.iter(|| annotate(black_box(t), &idx, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, interval_queries, annotate_table);
criterion_main!(benches);
