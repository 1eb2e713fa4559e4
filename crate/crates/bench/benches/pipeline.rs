//! End-to-end reconstruction benchmarks: ISD against the reweighted baselines.

use criterion::{criterion_group, criterion_main, Criterion};
use isd_core::isd::{isd_run, DetectionRule, IsdConfig};
use isd_core::linop::SensingOperator;
use isd_core::reweighted::{irl1_run, irls_run, ReweightConfig};
use isd_core::signal::{gen_signal, SignalKind};

fn demo_instance() -> (SensingOperator, Vec<f64>) {
    let (m, n, k) = (60usize, 200usize, 25usize);
    let op = SensingOperator::gaussian(m, n, 3).unwrap();
    let signal = gen_signal(SignalKind::Gaussian, n, k, 9).unwrap();
    let b = op.apply(&signal.values).unwrap();
    (op, b)
}

fn isd_demo(c: &mut Criterion) {
    let mut group = c.benchmark_group("isd_demo");
    group.sample_size(10);
    let (op, b) = demo_instance();
    let rule = DetectionRule::Geometric { beta: 5.0 };
    let cfg = IsdConfig::default();
    group.bench_function("geometric_beta5", |bench| {
        bench.iter(|| isd_run(&op, &b, &rule, &cfg, 0.0, None).unwrap())
    });
    group.finish();
}

fn baselines_demo(c: &mut Criterion) {
    let mut group = c.benchmark_group("baselines_demo");
    group.sample_size(10);
    let (op, b) = demo_instance();
    let cfg = ReweightConfig::default();
    group.bench_function("irl1", |bench| {
        bench.iter(|| irl1_run(&op, &b, &cfg, 0.0, None).unwrap())
    });
    group.bench_function("irls", |bench| {
        bench.iter(|| irls_run(&op, &b, &cfg, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, isd_demo, baselines_demo);
criterion_main!(benches);
