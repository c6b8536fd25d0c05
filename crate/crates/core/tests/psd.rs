mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use supou::basis::{
    Drift, GeneratingQuadruple, JumpDistribution, JumpKind, LevyMeasureModel, MatrixAtom, MixingMeasure, PoissonAtom,
    Ray, StateSpace, VectorLaw,
};
use supou::error::SupouError;
use supou::matfun::{decay_bounds_auto, expm, kron_sum, lyapunov_solve, unvec, vec};
use supou::process::{
    theoretical_acov, theoretical_mean, theoretical_var, SimulationConfig, SupOUSpec, ZIntegration,
};
use supou::psd::{
    conditional_cf, euler_log_prices, integrated_cov, psd_sde_residual, simulate_log_prices, simulate_psd_paths,
    theoretical_psd_moments, PSDSupOUSpec, PsdPath, PsdPathBundle, SVModelSpec,
};

fn psd_quad(gamma0: DMatrix<f64>, rate: f64, vectors: Vec<(f64, DVector<f64>)>, pi: MixingMeasure) -> GeneratingQuadruple {
    let d = gamma0.nrows();
    let jumps = JumpDistribution::new(JumpKind::RankOneWishart(VectorLaw::Discrete(vectors))).unwrap();
    GeneratingQuadruple::new(
        StateSpace::Matrix(d),
        Drift::Gamma0(vec(&gamma0)),
        None,
        LevyMeasureModel::new(rate, jumps).unwrap(),
        pi,
    )
    .unwrap()
}

fn psd_spec(q: GeneratingQuadruple) -> PSDSupOUSpec {
    PSDSupOUSpec::new(q, "psd").unwrap()
}

fn cfg(t_end: f64, dt: f64, n_paths: usize, seed: u64, trunc_tol: f64) -> SimulationConfig {
    SimulationConfig { t_start: 0.0, t_end, dt, trunc_tol, n_paths, seed, record_z: false }
}

fn random_vectors<R: Rng>(rng: &mut R, d: usize) -> Vec<(f64, DVector<f64>)> {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| (1.0 / n as f64, DVector::from_fn(d, |_, _| rng.random_range(-1.2..1.2)))).collect()
}

fn random_gamma0<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let f = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.3..0.3));
    &f * f.transpose()
}

/// Random PSD spec: a Gamma ray (`α ∈ [2, 3]`) or a two-atom discrete law.
fn random_psd_spec(seed: u64, d: usize) -> PSDSupOUSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = if seed % 2 == 0 {
        gamma_ray(random_stable(&mut rng, d), rng.random_range(2.0..3.0), 1.0)
    } else {
        MixingMeasure::DiscreteAtoms(vec![
            MatrixAtom::new(0.4, random_stable(&mut rng, d)).unwrap(),
            MatrixAtom::new(0.6, random_stable(&mut rng, d)).unwrap(),
        ])
    };
    let g0 = random_gamma0(&mut rng, d);
    let rate = rng.random_range(0.5..2.5);
    psd_spec(psd_quad(g0, rate, random_vectors(&mut rng, d), pi))
}

#[test]
fn zero_activity_is_identically_zero() {
    let s = psd_spec(psd_quad(DMatrix::zeros(2, 2), 0.0, vec![(1.0, v(&[1.0, 0.0]))], point(-DMatrix::identity(2, 2))));
    let b = simulate_psd_paths(&s, &cfg(2.0, 0.1, 3, 4, 1e-6)).unwrap();
    assert!(b.paths.iter().all(|p| p.sigma.iter().all(|&x| x == 0.0) && p.l.iter().all(|&x| x == 0.0)));
    let ic = integrated_cov(&b, &s).unwrap();
    assert!(ic.analytic.iter().all(|m| m.iter().all(|&x| x == 0.0)));
}

/// Oracle: `vec(Σ_t) = Σ_j e^{(A_j⊕A_j)(t−s_j)} vec(x_j) + vec(drift)`.
fn vec_reconstruction(b: &PsdPathBundle, p: usize, k: usize) -> DVector<f64> {
    let t = b.times[k];
    let mut out = vec(&b.drift);
    for at in b.paths[p].atoms.iter().filter(|at| at.time <= t) {
        out += expm(&kron_sum(&at.a).unwrap(), t - at.time).unwrap() * &at.jump;
    }
    out
}

#[test]
fn vec_identity_and_positivity() {
    let mut evals = 0;
    for seed in 0..20 {
        let d = 2 + seed as usize % 2;
        let s = random_psd_spec(seed, d);
        let b = simulate_psd_paths(&s, &cfg(5.0, 0.25, 3, seed, 1e-3)).unwrap();
        for p in 0..b.paths.len() {
            for k in 0..b.times.len() {
                let got = b.paths[p].sigma.column(k);
                let want = vec_reconstruction(&b, p, k);
                assert!((got - &want).amax() < 1e-10, "seed {seed}: {}", (got - want).amax());
                let m = b.sigma(p, k);
                assert_eq!(m, m.transpose());
                assert!(m.symmetric_eigen().eigenvalues.min() >= -1e-12);
                evals += 1;
            }
        }
    }
    assert!(evals > 1000);
}

#[test]
fn moments_of_half_identity() {
    let c = m(2, &[1.0, 0.2, 0.2, 0.5]);
    let s = psd_spec(psd_quad(c.clone(), 0.0, vec![(1.0, v(&[1.0, 0.0]))], point(-DMatrix::identity(2, 2) * 0.5)));
    let mo = theoretical_psd_moments(&s, &[]).unwrap();
    assert!((unvec(&mo.mean, 2) - c).norm() < 1e-13);
}

#[test]
fn one_dimensional_collapse() {
    // In d = 1, Σ is a scalar supOU process with A replaced by 2A and marks v².
    let (x0, rate, g0) = (0.7, 1.3, 0.2);
    for (pi, pi2) in [
        (point(m(1, &[-0.8])), point(m(1, &[-1.6]))),
        (gamma_ray(m(1, &[-1.0]), 2.5, 1.5), gamma_ray(m(1, &[-2.0]), 2.5, 1.5)),
    ] {
        let s = psd_spec(psd_quad(m(1, &[g0]), rate, vec![(1.0, v(&[x0]))], pi));
        let lags = [0.0, 0.5, 3.0];
        let mo = theoretical_psd_moments(&s, &lags).unwrap();
        let vs = SupOUSpec::new(
            quad(Drift::Gamma0(v(&[g0])), rate, JumpKind::DiscreteAtoms(vec![(1.0, v(&[x0 * x0]))]), pi2),
            "scalar",
        )
        .unwrap();
        assert!((mo.mean[0] - theoretical_mean(&vs).unwrap()[0]).abs() < 1e-10);
        assert!((mo.variance[(0, 0)] - theoretical_var(&vs).unwrap()[(0, 0)]).abs() < 1e-10);
        for (h, g) in &mo.acov {
            assert!((g[(0, 0)] - theoretical_acov(&vs, *h).unwrap()[(0, 0)]).abs() < 1e-10);
        }
    }
}

#[test]
fn gamma_ray_moments_match_simulation() {
    let b = m(2, &[-1.0, 0.3, 0.0, -0.7]);
    let s = psd_spec(psd_quad(
        m(2, &[0.1, 0.0, 0.0, 0.05]),
        1.5,
        vec![(0.5, v(&[1.0, 0.3])), (0.5, v(&[-0.2, 0.8]))],
        gamma_ray(b, 3.0, 1.0),
    ));
    let mo = theoretical_psd_moments(&s, &[1.0]).unwrap();
    let bundle = simulate_psd_paths(&s, &cfg(1.0, 1.0, 10_000, 21, 1e-4)).unwrap();
    for i in 0..4 {
        let xs: Vec<f64> = bundle.paths.iter().map(|p| p.sigma[(i, 0)]).collect();
        let (mu, se) = mean_se(&xs);
        assert!((mu - mo.mean[i]).abs() < 4.0 * se, "mean {i}: {mu} ± {se} vs {}", mo.mean[i]);
        for j in [0, 3] {
            let ys: Vec<f64> = bundle
                .paths
                .iter()
                .map(|p| (p.sigma[(i, 0)] - mo.mean[i]) * (p.sigma[(j, 0)] - mo.mean[j]))
                .collect();
            let (mu, se) = mean_se(&ys);
            let want = mo.variance[(i, j)];
            assert!((mu - want).abs() < 4.0 * se, "var {i}{j}: {mu} ± {se} vs {want}");
            let zs: Vec<f64> = bundle
                .paths
                .iter()
                .map(|p| (p.sigma[(i, 1)] - mo.mean[i]) * (p.sigma[(j, 0)] - mo.mean[j]))
                .collect();
            let (mu, se) = mean_se(&zs);
            let want = mo.acov[0].1[(i, j)];
            assert!((mu - want).abs() < 4.0 * se, "acov {i}{j}: {mu} ± {se} vs {want}");
        }
    }
}

/// `Σ_t = e^{At} x e^{Aᵀt}` from one atom at time 0.
fn single_atom_bundle(a: &DMatrix<f64>, x: &DMatrix<f64>, dt: f64, n: usize) -> PsdPathBundle {
    let d = a.nrows();
    let bound = decay_bounds_auto(a).unwrap();
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    let mut sigma = DMatrix::zeros(d * d, n + 1);
    for (k, &t) in times.iter().enumerate() {
        let e = expm(a, t).unwrap();
        sigma.set_column(k, &vec(&(&e * x * e.transpose())));
    }
    PsdPathBundle {
        times,
        dim: d,
        dt,
        trunc_horizon: 1.0,
        drift: DMatrix::zeros(d, d),
        gamma0: DMatrix::zeros(d, d),
        paths: vec![PsdPath {
            sigma,
            l: DMatrix::zeros(d * d, n + 1),
            atoms: vec![PoissonAtom { jump: vec(x), a: a.clone(), kappa: bound.kappa, rho: bound.rho, time: 0.0 }],
        }],
    }
}

#[test]
fn single_atom_integrated_cov_and_residual() {
    let a = m(2, &[-1.0, 0.6, -0.3, -0.5]);
    let vv = v(&[0.8, -0.4]);
    let x = &vv * vv.transpose();
    let s = psd_spec(psd_quad(DMatrix::zeros(2, 2), 1.0, vec![(1.0, vv.clone())], point(a.clone())));
    let b = single_atom_bundle(&a, &x, 0.05, 100);
    let ic = integrated_cov(&b, &s).unwrap();
    for (k, &t) in b.times.iter().enumerate() {
        let e = expm(&a, t).unwrap();
        let want = lyapunov_solve(&a, &(&e * &x * e.transpose() - &x)).unwrap();
        assert!((unvec(&ic.analytic[0].column(k).into_owned(), 2) - want).amax() < 1e-12);
    }
    // Single atom: rank one at every time.
    let sv = b.sigma(0, 50).symmetric_eigen().eigenvalues;
    assert!(sv.min().abs() < 1e-14 && sv.max() > 0.0);
    assert!(psd_sde_residual(&b, &s, ZIntegration::Analytic).unwrap()[0] < 1e-12);
}

#[test]
fn simulated_sde_residual_and_trapezoid_order() {
    for seed in 0..4 {
        let s = random_psd_spec(seed, 2);
        let coarse = simulate_psd_paths(&s, &cfg(8.0, 0.02, 2, seed, 1e-3)).unwrap();
        let fine = simulate_psd_paths(&s, &cfg(8.0, 0.01, 2, seed, 1e-3)).unwrap();
        for r in psd_sde_residual(&coarse, &s, ZIntegration::Analytic).unwrap() {
            assert!(r < 1e-12, "seed {seed}: {r}");
        }
        let err = |b: &PsdPathBundle| {
            let ic = integrated_cov(b, &s).unwrap();
            ic.analytic.iter().zip(&ic.trapezoid).map(|(a, t)| (a - t).amax()).collect::<Vec<_>>()
        };
        for (c, f) in err(&coarse).iter().zip(&err(&fine)) {
            assert!(c / f >= 3.5, "seed {seed}: ratio {}", c / f);
        }
        let rc = psd_sde_residual(&coarse, &s, ZIntegration::Trapezoid).unwrap();
        let rf = psd_sde_residual(&fine, &s, ZIntegration::Trapezoid).unwrap();
        for (c, f) in rc.iter().zip(&rf) {
            assert!(c / f >= 3.5, "seed {seed}: residual ratio {}", c / f);
        }
    }
}

#[test]
fn non_psd_marks_are_rejected() {
    let jumps = JumpDistribution::new(JumpKind::DiscreteAtoms(vec![(1.0, v(&[1.0, 0.0, 0.0, -1.0]))])).unwrap();
    let q = GeneratingQuadruple::new(
        StateSpace::Matrix(2),
        Drift::Gamma0(DVector::zeros(4)),
        None,
        LevyMeasureModel::new(1.0, jumps).unwrap(),
        point(-DMatrix::identity(2, 2)),
    )
    .unwrap();
    assert!(PSDSupOUSpec::new(q, "bad").is_err());
}

fn sv(vol: PSDSupOUSpec, mu: &[f64], beta: &[f64], rho: DMatrix<f64>, y0: &[f64]) -> SVModelSpec {
    SVModelSpec::new(v(mu), v(beta), rho, vol, v(y0)).unwrap()
}

#[test]
fn degenerate_model_keeps_prices_fixed() {
    let vol = psd_spec(psd_quad(DMatrix::zeros(2, 2), 0.0, vec![(1.0, v(&[1.0, 0.0]))], point(-DMatrix::identity(2, 2))));
    let model = sv(vol, &[0.0, 0.0], &[0.0, 0.0], DMatrix::zeros(2, 3), &[1.0, -2.0]);
    let out = simulate_log_prices(&model, &cfg(1.0, 0.1, 2, 3, 1e-6)).unwrap();
    for y in &out.y {
        for k in 0..y.ncols() {
            assert_eq!(y.column(k), v(&[1.0, -2.0]));
        }
    }
}

fn ks_normal(mut xs: Vec<f64>) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    xs.sort_by(f64::total_cmp);
    let len = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = n.cdf(x);
            (f - i as f64 / len).abs().max(((i + 1) as f64 / len - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn constant_volatility_gives_gaussian_increments() {
    let vol = psd_spec(psd_quad(DMatrix::zeros(2, 2), 0.0, vec![(1.0, v(&[1.0, 0.0]))], point(-DMatrix::identity(2, 2))));
    let model = sv(vol, &[0.3, -0.1], &[0.0, 0.0], DMatrix::zeros(2, 3), &[0.0, 0.0]);
    let n = 100_000;
    let dt = 0.01;
    let id = vec(&DMatrix::identity(2, 2));
    let path = PsdPath {
        sigma: DMatrix::from_fn(4, n + 1, |i, _| id[i]),
        l: DMatrix::zeros(4, n + 1),
        atoms: Vec::new(),
    };
    let y = euler_log_prices(&model, &path, dt, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let crit = 1.628 / (n as f64).sqrt();
    for i in 0..2 {
        let z: Vec<f64> = (0..n).map(|k| (y[(i, k + 1)] - y[(i, k)] - model.mu[i] * dt) / dt.sqrt()).collect();
        let d = ks_normal(z);
        assert!(d < crit, "coordinate {i}: KS {d} vs {crit}");
    }
}

#[test]
fn forced_jump_moves_price_by_rho() {
    let vol = psd_spec(psd_quad(m(1, &[0.0]), 1.0, vec![(1.0, v(&[1.0]))], point(m(1, &[-1.0]))));
    let model = sv(vol, &[0.0], &[0.0], m(1, &[1.0]), &[0.5]);
    let n = 20;
    let mut l = DMatrix::zeros(1, n + 1);
    for k in 7..=n {
        l[(0, k)] = 0.64;
    }
    let path = PsdPath { sigma: DMatrix::zeros(1, n + 1), l, atoms: Vec::new() };
    let y = euler_log_prices(&model, &path, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for k in 0..=n {
        assert_eq!(y[(0, k)], if k >= 7 { 0.5 + 0.64 } else { 0.5 });
    }
}

#[test]
fn rho_adjoint_is_the_trace_adjoint() {
    let vol = random_psd_spec(1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rho = DMatrix::from_fn(3, 6, |_, _| rng.random_range(-1.0..1.0));
    let model = sv(vol, &[0.0; 3], &[0.0; 3], rho, &[0.0; 3]);
    let u = v(&[0.3, -1.0, 2.0]);
    let x = random_gamma0(&mut rng, 3);
    let lhs = (model.rho_adjoint(&u) * &x).trace();
    assert!((lhs - u.dot(&model.rho_apply(&x))).abs() < 1e-13);
}

#[test]
fn conditional_cf_trivial_cases() {
    let vol = psd_spec(psd_quad(DMatrix::zeros(2, 2), 0.0, vec![(1.0, v(&[1.0, 0.0]))], point(-DMatrix::identity(2, 2))));
    let model = sv(vol, &[0.2, -0.4], &[0.0, 0.0], DMatrix::zeros(2, 3), &[1.0, 3.0]);
    assert_eq!(conditional_cf(&model, &v(&[0.0, 0.0]), 1.0).unwrap(), Complex64::new(1.0, 0.0));
    let u = v(&[0.7, -1.1]);
    let t = 2.0;
    let want = Complex64::new(0.0, (v(&[1.0, 3.0]) + v(&[0.2, -0.4]) * t).dot(&u)).exp();
    assert!((conditional_cf(&model, &u, t).unwrap() - want).norm() < 1e-13);
}

#[test]
fn conditional_cf_is_bounded() {
    let vol = psd_spec(psd_quad(
        m(2, &[0.1, 0.02, 0.02, 0.1]),
        1.0,
        vec![(0.5, v(&[0.5, 0.2])), (0.5, v(&[0.1, -0.6]))],
        MixingMeasure::DiscreteAtoms(vec![
            MatrixAtom::new(0.5, m(2, &[-1.0, 0.2, 0.0, -0.5])).unwrap(),
            MatrixAtom::new(0.5, m(2, &[-3.0, 0.0, 0.0, -2.0])).unwrap(),
        ]),
    ));
    let model = sv(vol, &[0.0, 0.1], &[0.5, -0.5], DMatrix::from_row_slice(2, 3, &[0.2, 0.0, 0.1, 0.0, 0.3, -0.2]), &[0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let u = v(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        assert!(conditional_cf(&model, &u, 1.5).unwrap().norm() <= 1.0 + 1e-12);
    }
}

#[test]
fn conditional_cf_needs_discrete_mixing() {
    let vol = psd_spec(psd_quad(m(1, &[0.0]), 1.0, vec![(1.0, v(&[1.0]))], gamma_ray(m(1, &[-1.0]), 2.0, 1.0)));
    let model = sv(vol, &[0.0], &[0.0], m(1, &[0.0]), &[0.0]);
    assert!(matches!(conditional_cf(&model, &v(&[1.0]), 1.0), Err(SupouError::UnsupportedModel(_))));
}

#[test]
fn conditional_cf_matches_simulation() {
    let vol = psd_spec(psd_quad(m(1, &[0.05]), 0.5, vec![(1.0, v(&[0.6]))], point(m(1, &[-0.7]))));
    let model = sv(vol, &[0.1], &[0.0], m(1, &[-0.5]), &[0.2]);
    let t = 1.0;
    let out = simulate_log_prices(&model, &cfg(t, 0.002, 100_000, 31, 1e-8)).unwrap();
    for u in [0.5, 1.0] {
        let (re, im): (Vec<f64>, Vec<f64>) = out
            .y
            .iter()
            .map(|y| {
                let z = Complex64::new(0.0, u * y[(0, y.ncols() - 1)]).exp();
                (z.re, z.im)
            })
            .unzip();
        let want = conditional_cf(&model, &v(&[u]), t).unwrap();
        let (mr, sr) = mean_se(&re);
        let (mi, si) = mean_se(&im);
        assert!((mr - want.re).abs() < 4.0 * sr, "u = {u}: re {mr} ± {sr} vs {}", want.re);
        assert!((mi - want.im).abs() < 4.0 * si, "u = {u}: im {mi} ± {si} vs {}", want.im);
    }
}

#[test]
fn ray_law_is_psd_valid() {
    let r = Ray::new(m(2, &[-1.0, 0.0, 0.0, -2.0]), 2.0, 1.0).unwrap();
    let s = psd_spec(psd_quad(DMatrix::zeros(2, 2), 1.0, vec![(1.0, v(&[1.0, 1.0]))], MixingMeasure::GammaRay(r)));
    assert!(theoretical_psd_moments(&s, &[0.0]).is_ok());
}
