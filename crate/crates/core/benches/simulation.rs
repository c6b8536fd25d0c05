use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use supou::basis::{
    Drift, GeneratingQuadruple, JumpDistribution, JumpKind, LevyMeasureModel, MixingMeasure, Ray, StateSpace,
};
use supou::par::Execution;
use supou::process::{simulate_paths_with, SimulationConfig, SupOUSpec};
use supou::psd::{simulate_psd_paths_with, PSDSupOUSpec};

fn vector_spec() -> SupOUSpec {
    let b = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
    let jumps = JumpKind::DiscreteAtoms(vec![(0.5, DVector::from_vec(vec![1.0, 0.5])), (0.5, DVector::from_vec(vec![-0.5, 1.0]))]);
    let q = GeneratingQuadruple::new(
        StateSpace::Vector(2),
        Drift::Gamma0(DVector::zeros(2)),
        None,
        LevyMeasureModel::new(2.0, JumpDistribution::new(jumps).unwrap()).unwrap(),
        MixingMeasure::GammaRay(Ray::new(b, 2.5, 1.0).unwrap()),
    )
    .unwrap();
    SupOUSpec::new(q, "bench").unwrap()
}

fn psd_spec() -> PSDSupOUSpec {
    let b = DMatrix::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -1.5]);
    let x = DVector::from_vec(vec![1.0, 0.3, 0.3, 0.5]);
    let q = GeneratingQuadruple::new(
        StateSpace::Matrix(2),
        Drift::Gamma0(DVector::zeros(4)),
        None,
        LevyMeasureModel::new(1.0, JumpDistribution::new(JumpKind::DiscreteAtoms(vec![(1.0, x)])).unwrap()).unwrap(),
        MixingMeasure::GammaRay(Ray::new(b, 2.5, 1.0).unwrap()),
    )
    .unwrap();
    PSDSupOUSpec::new(q, "bench").unwrap()
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_vector(c: &mut Criterion) {
    let spec = vector_spec();
    let cfg = SimulationConfig { t_start: 0.0, t_end: 20.0, dt: 0.05, trunc_tol: 1e-3, n_paths: 64, seed: 1, record_z: false };
    let mut group = c.benchmark_group("vector_paths");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(simulate_paths_with(&spec, &cfg, exec).unwrap()))
        });
    }
    group.finish();
}

fn bench_psd(c: &mut Criterion) {
    let spec = psd_spec();
    let cfg = SimulationConfig { t_start: 0.0, t_end: 20.0, dt: 0.05, trunc_tol: 1e-3, n_paths: 64, seed: 1, record_z: false };
    let mut group = c.benchmark_group("psd_paths");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(simulate_psd_paths_with(&spec, &cfg, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_vector, bench_psd
}
criterion_main!(benches);
