#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use supou::basis::{
    Drift, GeneratingQuadruple, JumpDistribution, JumpKind, LevyMeasureModel, MatrixAtom, MixingMeasure, Ray,
    StateSpace,
};

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn m(d: usize, x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, x)
}

pub fn quad(gamma: Drift, rate: f64, jumps: JumpKind, pi: MixingMeasure) -> GeneratingQuadruple {
    quad_gauss(gamma, None, rate, jumps, pi)
}

pub fn quad_gauss(
    gamma: Drift,
    sigma: Option<DMatrix<f64>>,
    rate: f64,
    jumps: JumpKind,
    pi: MixingMeasure,
) -> GeneratingQuadruple {
    let d = pi.dim();
    let jumps = JumpDistribution::new(jumps).unwrap();
    GeneratingQuadruple::new(StateSpace::Vector(d), gamma, sigma, LevyMeasureModel::new(rate, jumps).unwrap(), pi)
        .unwrap()
}

pub fn gamma_ray(b: DMatrix<f64>, alpha: f64, beta: f64) -> MixingMeasure {
    MixingMeasure::GammaRay(Ray::new(b, alpha, beta).unwrap())
}

pub fn point(a: DMatrix<f64>) -> MixingMeasure {
    MixingMeasure::DiscreteAtoms(vec![MatrixAtom::new(1.0, a).unwrap()])
}

/// A random stable matrix `−(c I + S Sᵀ) + K` with a skew part `K`, which is
/// diagonalizable with probability one.
pub fn random_stable<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let s = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.6..0.6));
    let k = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
    let skew = (&k - k.transpose()) * 0.5;
    -(DMatrix::identity(d, d) * rng.random_range(0.3..1.5) + &s * s.transpose()) + skew
}

pub fn random_jumps<R: Rng>(rng: &mut R, d: usize) -> JumpKind {
    let n = rng.random_range(1..=3);
    JumpKind::DiscreteAtoms(
        (0..n).map(|_| (1.0 / n as f64, DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5)))).collect(),
    )
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
