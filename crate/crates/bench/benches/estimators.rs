use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use winprob::data::embedded_epds;
use winprob::sim::{run_study_methods, Mechanism, Scenario, StudyConfig};
use winprob::{cca_estimate, gpc_estimate, mmrm_estimate, EstimatorOptions, Method};

fn epds(c: &mut Criterion) {
    let data = embedded_epds();
    let o = EstimatorOptions::default();
    c.bench_function("epds_gpc", |b| b.iter(|| gpc_estimate(black_box(&data), &o).unwrap()));
    c.bench_function("epds_cca", |b| b.iter(|| cca_estimate(black_box(&data), &o).unwrap()));
    c.bench_function("epds_mmrm", |b| b.iter(|| mmrm_estimate(black_box(&data), &o).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let scenario = Scenario::from_case(Mechanism::Mar, 5, [50, 50]).unwrap();
    let config = StudyConfig::new(20, 1).with_threads(1);
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    for m in Method::ALL {
        group.bench_function(m.name(), |b| {
            b.iter(|| run_study_methods(black_box(&scenario), &[m], &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, epds, simulation);
criterion_main!(benches);
