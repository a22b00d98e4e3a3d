use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use momfix::par::Exec;
use momfix::spectrum::ledger_by_limit_with;
use momfix::transform::{that_step_with, SpectralMeasure, StepOptions};
use std::hint::black_box;
use std::time::Duration;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn limit_ledger(c: &mut Criterion) {
    let mut g = c.benchmark_group("ledger_by_limit p=6 N=1e5");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ledger_by_limit_with(black_box(6), 100_000, exec).unwrap())
        });
    }
    g.finish();
}

fn measure_step(c: &mut Criterion) {
    let mu = SpectralMeasure::uniform(10);
    let mut g = c.benchmark_group("that_step uniform p=10");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, exec) in MODES {
        let opts = StepOptions {
            exec,
            ..StepOptions::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| that_step_with(black_box(&mu), 10, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, limit_ledger, measure_step);
criterion_main!(benches);
