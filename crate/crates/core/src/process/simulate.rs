//! Pathwise simulation from the Lévy–Itô decomposition of the basis.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Grid, SimulationConfig, SupOUSpec, THEORY_TOL};
use crate::basis::sampler::sample_atoms_with;
use crate::basis::{pi_expectation, DecayFunctional, GeneratingQuadruple, Integral, PoissonAtom, StateSpace};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, expm_with_integral, lyapunov_solve};
use crate::par::{try_map_indexed, Execution};

/// Kernel contributions below this multiple of the jump size are dropped.
pub(crate) const PRUNE_LEVEL: f64 = 1e-17;

const MAX_HORIZON: f64 = 1e6;

/// Gaussian OU component attached to one atom of a discrete `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTrack {
    pub a: DMatrix<f64>,
    /// Component values on the grid, one column per time.
    pub g: DMatrix<f64>,
    /// Driving Brownian motion, zero at `t_start`.
    pub w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    /// `d × (n+1)`, one column per grid time.
    pub x: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub z: Option<DMatrix<f64>>,
    /// Atoms that contribute on the window, sorted by time.
    pub atoms: Vec<PoissonAtom>,
    pub gaussian: Vec<GaussianTrack>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub dim: usize,
    pub dt: f64,
    pub trunc_horizon: f64,
    /// Constant drift part of `X` (or `vec Σ`).
    pub drift_x: DVector<f64>,
    pub gamma0: DVector<f64>,
    pub paths: Vec<SamplePath>,
}

impl PathBundle {
    pub(crate) fn grid(&self) -> Grid {
        Grid { t_start: self.times[0], dt: self.dt, n: self.times.len() - 1 }
    }
}

/// Smallest `T = 2^k ≥ 1` with
/// `E_π[κ^p e^{−qρT}/(qρ)] (λ E‖x‖ + ‖γ₀‖) < tol`, where `(p, q) = (1, 1)`
/// for vector and `(2, 2)` for matrix-valued processes.
pub fn truncation_horizon(q: &GeneratingQuadruple, tol: f64) -> Result<f64> {
    let (p, qq) = match q.space {
        StateSpace::Vector(_) => (1.0, 1.0),
        StateSpace::Matrix(_) => (2.0, 2.0),
    };
    let mean_jump = if q.levy.rate == 0.0 {
        0.0
    } else {
        match q.levy.jumps.mean_norm_bound() {
            Integral::Finite(v) | Integral::Bounded(v) => q.levy.rate * v,
            Integral::Infinite => return Err(SupouError::TruncationInfeasible(f64::INFINITY)),
            Integral::Unavailable => {
                return Err(SupouError::UnsupportedModel("mean jump size is unavailable for this jump law".into()))
            }
        }
    };
    let scale = mean_jump + q.gamma0()?.norm();
    if scale == 0.0 {
        return Ok(1.0);
    }
    let mut t = 1.0;
    while t <= MAX_HORIZON {
        let tail = match q.pi.decay_functional(DecayFunctional::DecayedKappaPowOverRho { p, q: qq, t })? {
            Integral::Finite(v) | Integral::Bounded(v) => v / qq,
            Integral::Infinite => return Err(SupouError::TruncationInfeasible(f64::INFINITY)),
            Integral::Unavailable => {
                return Err(SupouError::UnsupportedModel("truncation tail of π is unavailable".into()))
            }
        };
        if tail * scale < tol {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(SupouError::TruncationInfeasible(t))
}

/// Exact `(ΔG, ΔW)` transition of one Gaussian OU component.
#[derive(Debug, Clone)]
struct GaussianStep {
    a: DMatrix<f64>,
    e_dt: DMatrix<f64>,
    /// Factor of the joint `2d × 2d` noise covariance.
    noise: DMatrix<f64>,
    /// Factor of the stationary covariance.
    stationary: DMatrix<f64>,
}

pub(crate) fn psd_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sq)
}

fn gaussian_steps(q: &GeneratingQuadruple, dt: f64) -> Result<Vec<GaussianStep>> {
    if !q.has_gaussian() {
        return Ok(Vec::new());
    }
    let atoms = q.pi.discrete_atoms().ok_or_else(|| {
        SupouError::UnsupportedModel("a Gaussian basis part needs a discrete mixing measure".into())
    })?;
    let sigma = q.gaussian.as_ref().expect("has_gaussian");
    let d = sigma.nrows();
    atoms
        .iter()
        .map(|atom| {
            let c = sigma * atom.weight;
            let p = lyapunov_solve(&atom.a, &(-&c))?;
            let (e, f) = expm_with_integral(&atom.a, dt)?;
            let qm = &p - &e * &p * e.transpose();
            let k = &f * &c;
            let mut joint = DMatrix::zeros(2 * d, 2 * d);
            joint.view_mut((0, 0), (d, d)).copy_from(&qm);
            joint.view_mut((0, d), (d, d)).copy_from(&k);
            joint.view_mut((d, 0), (d, d)).copy_from(&k.transpose());
            joint.view_mut((d, d), (d, d)).copy_from(&(&c * dt));
            Ok(GaussianStep { a: atom.a.clone(), e_dt: e, noise: psd_factor(&joint), stationary: psd_factor(&p) })
        })
        .collect()
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

pub(crate) fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Visits `e^{A(t_k − s)} x` on every grid time `t_k ≥ s` until the kernel bound
/// `κ e^{−ρ(t_k − s)}` falls below [`PRUNE_LEVEL`]. Returns `false` when the
/// atom never reaches the grid.
pub(crate) fn propagate_atom(
    atom: &PoissonAtom,
    grid: &Grid,
    mut visit: impl FnMut(usize, &DVector<f64>),
) -> Result<bool> {
    let Some(k0) = grid.first_at_or_after(atom.time) else {
        return Ok(false);
    };
    let alive = |k: usize| atom.kappa * (-atom.rho * (grid.time(k) - atom.time)).exp() > PRUNE_LEVEL;
    if !alive(k0) {
        return Ok(false);
    }
    let mut v = expm(&atom.a, grid.time(k0) - atom.time)? * &atom.jump;
    let e = expm(&atom.a, grid.dt)?;
    let mut next = DVector::zeros(v.len());
    let mut k = k0;
    loop {
        visit(k, &v);
        if k == grid.n || !alive(k + 1) {
            break;
        }
        next.gemv(1.0, &e, &v, 0.0);
        std::mem::swap(&mut v, &mut next);
        k += 1;
    }
    Ok(true)
}

/// Adds `Σ_{s_j ∈ (t_start, t_k]} x_j + γ₀ (t_k − t_start)` to `l`.
pub(crate) fn accumulate_levy(l: &mut DMatrix<f64>, atoms: &[PoissonAtom], grid: &Grid, gamma0: &DVector<f64>) {
    let m = l.nrows();
    let mut inc = DMatrix::<f64>::zeros(m, grid.n + 1);
    for atom in atoms {
        if atom.time > grid.t_start {
            if let Some(k0) = grid.first_at_or_after(atom.time) {
                let mut col = inc.column_mut(k0);
                col += &atom.jump;
            }
        }
    }
    let mut run = DVector::<f64>::zeros(m);
    for k in 0..=grid.n {
        run += inc.column(k);
        let mut col = l.column_mut(k);
        col += &run + gamma0 * (grid.time(k) - grid.t_start);
    }
}

/// Stationary drift part `E_π[−A⁻¹] γ₀` of `X`.
fn stationary_drift(q: &GeneratingQuadruple, gamma0: &DVector<f64>) -> Result<DVector<f64>> {
    if gamma0.iter().all(|&x| x == 0.0) {
        return Ok(DVector::zeros(gamma0.len()));
    }
    let g = DMatrix::from_column_slice(gamma0.len(), 1, gamma0.as_slice());
    let e = pi_expectation(
        &q.pi,
        |a| {
            let inv = a.clone().try_inverse().ok_or_else(|| SupouError::Conditioning("singular mixing matrix".into()))?;
            Ok(-(inv * &g))
        },
        THEORY_TOL,
    )?;
    Ok(e.column(0).into_owned())
}

/// Simulates `cfg.n_paths` independent paths on the grid of `cfg`.
pub fn simulate_paths(spec: &SupOUSpec, cfg: &SimulationConfig) -> Result<PathBundle> {
    simulate_paths_with(spec, cfg, Execution::available())
}

/// [`simulate_paths`] with an explicit execution mode.
pub fn simulate_paths_with(spec: &SupOUSpec, cfg: &SimulationConfig, exec: Execution) -> Result<PathBundle> {
    cfg.validate()?;
    let q = &spec.quadruple;
    let grid = cfg.grid();
    let d = spec.dim();
    let gamma0 = q.gamma0()?;
    let gauss = gaussian_steps(q, cfg.dt)?;
    let horizon = truncation_horizon(q, cfg.trunc_tol)?;
    let drift_x = stationary_drift(q, &gamma0)?;
    let paths = try_map_indexed(exec, cfg.n_paths, |p| {
        let mut rng = path_rng(cfg.seed, p);
        let atoms = sample_atoms_with(q, cfg.t_start - horizon, cfg.t_end, &mut rng)?;
        let mut x = DMatrix::<f64>::zeros(d, grid.n + 1);
        let mut z = cfg.record_z.then(|| DMatrix::<f64>::zeros(d, grid.n + 1));
        let mut kept = Vec::new();
        let mut az = DVector::zeros(d);
        for atom in atoms {
            let used = propagate_atom(&atom, &grid, |k, v| {
                let mut col = x.column_mut(k);
                col += v;
                if let Some(z) = z.as_mut() {
                    az.gemv(1.0, &atom.a, v, 0.0);
                    let mut zc = z.column_mut(k);
                    zc += &az;
                }
            })?;
            if used {
                kept.push(atom);
            }
        }
        let mut l = DMatrix::<f64>::zeros(d, grid.n + 1);
        accumulate_levy(&mut l, &kept, &grid, &gamma0);
        for k in 0..=grid.n {
            let mut col = x.column_mut(k);
            col += &drift_x;
            if let Some(z) = z.as_mut() {
                let mut zc = z.column_mut(k);
                zc -= &gamma0;
            }
        }
        let mut tracks = Vec::with_capacity(gauss.len());
        for step in &gauss {
            let mut g = DMatrix::<f64>::zeros(d, grid.n + 1);
            let mut w = DMatrix::<f64>::zeros(d, grid.n + 1);
            g.set_column(0, &(&step.stationary * standard_normals(&mut rng, d)));
            for k in 1..=grid.n {
                let xi = &step.noise * standard_normals(&mut rng, 2 * d);
                let gk = &step.e_dt * g.column(k - 1) + xi.rows(0, d);
                let wk = w.column(k - 1) + xi.rows(d, d);
                g.set_column(k, &gk);
                w.set_column(k, &wk);
            }
            x += &g;
            l += &w;
            if let Some(z) = z.as_mut() {
                *z += &step.a * &g;
            }
            tracks.push(GaussianTrack { a: step.a.clone(), g, w });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SupouError::Conditioning("simulated path is not finite".into()));
        }
        Ok(SamplePath { x, l, z, atoms: kept, gaussian: tracks })
    })?;
    Ok(PathBundle {
        times: grid.times(),
        dim: d,
        dt: cfg.dt,
        trunc_horizon: horizon,
        drift_x,
        gamma0,
        paths,
    })
}
