use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lffc_core::sweep::{lowpass_points, run_sweep, Execution};
use lffc_core::{ScenarioConfig, ScenarioSpec};

fn sweep(c: &mut Criterion) {
    let base = ScenarioConfig::from_spec(&ScenarioSpec::default()).expect("default scenario");
    let points = lowpass_points(&[0.025, 0.05, 0.075, 0.1], &[0.0, 2.0, 5.0, 10.0]);
    let mut group = c.benchmark_group("lowpass_sweep_16x10");
    group.sample_size(10);
    for (name, exec) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let out = run_sweep(&base, &points, 10, exec);
                assert!(out.iter().all(|r| r.is_ok()));
                out
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
