use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nhzeno::dynamics::StateVector;
use nhzeno::indicators::{IndicatorConfig, DEFAULT_HORIZON};
use nhzeno::model::NonHermitianHamiltonian;
use nhzeno::numerics::expm;
use nhzeno::sweep::{run_sweep, Axis, Execution, Family, Indicator, SweepSpec};

fn spec(nd: usize, np: usize) -> SweepSpec {
    let cfg = IndicatorConfig::new(DEFAULT_HORIZON, 501, StateVector::basis(3, 1).unwrap()).unwrap();
    SweepSpec::new(
        Axis::log(0.1, 100.0, nd).unwrap(),
        Axis::linear(0.0, std::f64::consts::PI, np).unwrap(),
        Family::three_state(0.2),
        cfg,
        Indicator::ALL.to_vec(),
    )
    .unwrap()
}

fn sweep_modes(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (nd, np) in [(8, 8), (24, 16)] {
        let s = spec(nd, np);
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, format!("{nd}x{np}")), &s, |b, s| {
                b.iter(|| run_sweep(black_box(s), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn expm_sizes(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    let h = NonHermitianHamiltonian::three_state(5.0, 1.0, 0.2, 0.2, 1.0, 0.1)
        .unwrap()
        .assemble();
    group.bench_function("three_state_dt", |b| b.iter(|| expm(black_box(&h), 1e-3).unwrap()));
    group.bench_function("three_state_t10", |b| b.iter(|| expm(black_box(&h), 10.0).unwrap()));
    group.finish();
}

criterion_group!(benches, sweep_modes, expm_sizes);
criterion_main!(benches);
