use criterion::{black_box, criterion_group, criterion_main, Criterion};
use vmlab_core::bench_harness::oracle::{collatz_tally_sequential, COLLATZ_LIMIT};
use vmlab_core::bench_harness::{run_suite_sequential, BenchConfig, BenchName, OutputFormat};

fn counts_only() -> BenchConfig {
    BenchConfig {
        repetitions: 1,
        warmup: 0,
        fine_timing: false,
        format: OutputFormat::Json,
    }
}

fn collatz_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("collatz_oracle");
    g.bench_function("sequential", |b| {
        b.iter(|| collatz_tally_sequential(black_box(COLLATZ_LIMIT)))
    });
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| {
        b.iter(|| vmlab_core::bench_harness::oracle::collatz_tally_parallel(black_box(COLLATZ_LIMIT)))
    });
    g.finish();
}

fn counts_only_suite(c: &mut Criterion) {
    let names = [BenchName::Fibonacci, BenchName::Recursion];
    let config = counts_only();
    let mut g = c.benchmark_group("counts_only_suite");
    g.bench_function("sequential", |b| {
        b.iter(|| run_suite_sequential(&names, &config).unwrap())
    });
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| {
        b.iter(|| vmlab_core::bench_harness::run_suite_parallel(&names, &config).unwrap())
    });
    g.finish();
}

criterion_group!(benches, collatz_oracle, counts_only_suite);
criterion_main!(benches);
