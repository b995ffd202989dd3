use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ghostcorr::analysis::bootstrap_error;
use ghostcorr::{
    correlate, DetectorNoiseSpec, Execution, ExperimentGeometry, FrameSet, GridSpec, ScanMode, ScanSpec, Simulator,
};

const FRAMES: usize = 256;
const MODES: [(Execution, &str); 2] = [(Execution::Sequential, "sequential"), (Execution::Parallel, "parallel")];

fn simulator() -> Simulator {
    Simulator::new(
        ExperimentGeometry::default(),
        GridSpec::default_source(),
        GridSpec::default_detector(),
        DetectorNoiseSpec::off(),
        2013,
    )
    .expect("default setup is valid")
}

fn frames() -> FrameSet {
    simulator().simulate(FRAMES, Execution::Parallel)
}

fn bench_simulate(c: &mut Criterion) {
    let sim = simulator();
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.throughput(Throughput::Elements(FRAMES as u64));
    for (exec, name) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sim.simulate(FRAMES, exec))
        });
    }
    g.finish();
}

fn bench_correlate(c: &mut Criterion) {
    let set = frames();
    let mut g = c.benchmark_group("correlate");
    g.throughput(Throughput::Elements(FRAMES as u64));
    for mode in [ScanMode::G2FixedRef, ScanMode::G3Opposite] {
        let scan = ScanSpec::over_grid(mode, 0.0, set.detector_grid());
        for (exec, name) in MODES {
            g.bench_with_input(BenchmarkId::new(mode.to_string(), name), &exec, |b, &exec| {
                b.iter(|| correlate(&set, &scan, exec).expect("valid frames"))
            });
        }
    }
    g.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let set = frames();
    let scan = ScanSpec::over_grid(ScanMode::G3Sync, 0.0, set.detector_grid());
    let mut g = c.benchmark_group("bootstrap");
    g.sample_size(10);
    for (exec, name) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| bootstrap_error(&set, &scan, 50, 1, exec).expect("enough frames"))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_simulate, bench_correlate, bench_bootstrap);
criterion_main!(benches);
