//! Path simulation of `Σ_t` by propagating matrix square-root factors.

use nalgebra::{DMatrix, DVector};

use super::PSDSupOUSpec;
use crate::basis::sampler::sample_atoms_with;
use crate::basis::{pi_expectation, GeneratingQuadruple, PoissonAtom};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, lyapunov_solve, unvec, vec};
use crate::par::{try_map_indexed, Execution};
use crate::process::simulate::{accumulate_levy, path_rng, psd_factor, PRUNE_LEVEL};
use crate::process::{truncation_horizon, Grid, SimulationConfig, THEORY_TOL};

/// One simulated path of `Σ` and of the matrix subordinator `L`, both stored
/// column-wise in `vec` form (`d² × (n+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct PsdPath {
    pub sigma: DMatrix<f64>,
    pub l: DMatrix<f64>,
    /// Atoms whose kernel reaches the grid; jumps are in `vec` form.
    pub atoms: Vec<PoissonAtom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdPathBundle {
    pub times: Vec<f64>,
    pub dim: usize,
    pub dt: f64,
    pub trunc_horizon: f64,
    /// Stationary drift part `−E_π[𝐀(A)⁻¹ γ₀]` of every `Σ_t`.
    pub drift: DMatrix<f64>,
    pub gamma0: DMatrix<f64>,
    pub paths: Vec<PsdPath>,
}

impl PsdPathBundle {
    /// `Σ_{t_k}` of path `p` as a `d × d` matrix.
    pub fn sigma(&self, p: usize, k: usize) -> DMatrix<f64> {
        unvec(&self.paths[p].sigma.column(k).into_owned(), self.dim)
    }

    pub(crate) fn grid(&self) -> Grid {
        Grid { t_start: self.times[0], dt: self.dt, n: self.times.len() - 1 }
    }
}

/// `−E_π[𝐀(A)⁻¹ γ₀]`, symmetrized.
fn stationary_drift(q: &GeneratingQuadruple, gamma0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = gamma0.nrows();
    if gamma0.iter().all(|&x| x == 0.0) {
        return Ok(DMatrix::zeros(d, d));
    }
    let e = pi_expectation(&q.pi, |a| Ok(-lyapunov_solve(a, gamma0)?), THEORY_TOL)?;
    Ok((&e + e.transpose()) * 0.5)
}

/// Columns of a square-root factor of the PSD mark, dropping null directions.
fn mark_factor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let f = psd_factor(x);
    let keep: Vec<usize> = (0..f.ncols()).filter(|&j| f.column(j).norm() > 0.0).collect();
    f.select_columns(&keep)
}

/// Adds `e^{Aτ} x e^{Aᵀτ}` for every grid time `τ = t_k − s ≥ 0` while
/// `κ² e^{−2ρτ}` stays above [`PRUNE_LEVEL`]. Returns `false` when the atom
/// never reaches the grid.
pub(crate) fn propagate_factor(
    atom: &PoissonAtom,
    grid: &Grid,
    d: usize,
    mut visit: impl FnMut(usize, &DMatrix<f64>),
) -> Result<bool> {
    let Some(k0) = grid.first_at_or_after(atom.time) else {
        return Ok(false);
    };
    let k2 = atom.kappa * atom.kappa;
    let alive = |k: usize| k2 * (-2.0 * atom.rho * (grid.time(k) - atom.time)).exp() > PRUNE_LEVEL;
    if !alive(k0) {
        return Ok(false);
    }
    let f = mark_factor(&unvec(&atom.jump, d));
    let mut g = expm(&atom.a, grid.time(k0) - atom.time)? * f;
    let e = expm(&atom.a, grid.dt)?;
    let mut next = g.clone();
    let mut s = DMatrix::zeros(d, d);
    let mut k = k0;
    loop {
        s.fill(0.0);
        for c in g.column_iter() {
            s.ger(1.0, &c, &c, 1.0);
        }
        visit(k, &s);
        if k == grid.n || !alive(k + 1) {
            break;
        }
        next.gemm(1.0, &e, &g, 0.0);
        std::mem::swap(&mut g, &mut next);
        k += 1;
    }
    Ok(true)
}

/// Simulates `cfg.n_paths` paths of `Σ`.
pub fn simulate_psd_paths(spec: &PSDSupOUSpec, cfg: &SimulationConfig) -> Result<PsdPathBundle> {
    simulate_psd_paths_with(spec, cfg, Execution::available())
}

/// [`simulate_psd_paths`] with an explicit execution mode.
pub fn simulate_psd_paths_with(spec: &PSDSupOUSpec, cfg: &SimulationConfig, exec: Execution) -> Result<PsdPathBundle> {
    cfg.validate()?;
    let q = &spec.quadruple;
    let d = spec.dim();
    let grid = cfg.grid();
    let gamma0 = spec.gamma0_matrix()?;
    let gamma0_vec = vec(&gamma0);
    let horizon = truncation_horizon(q, cfg.trunc_tol)?;
    let drift = stationary_drift(q, &gamma0)?;
    let drift_vec: DVector<f64> = vec(&drift);
    let paths = try_map_indexed(exec, cfg.n_paths, |p| {
        let mut rng = path_rng(cfg.seed, p);
        let atoms = sample_atoms_with(q, cfg.t_start - horizon, cfg.t_end, &mut rng)?;
        let mut sigma = DMatrix::<f64>::zeros(d * d, grid.n + 1);
        let mut kept = Vec::new();
        for atom in atoms {
            let used = propagate_factor(&atom, &grid, d, |k, s| {
                let mut col = sigma.column_mut(k);
                for (c, v) in col.iter_mut().zip(s.iter()) {
                    *c += v;
                }
            })?;
            if used {
                kept.push(atom);
            }
        }
        for k in 0..=grid.n {
            let mut col = sigma.column_mut(k);
            col += &drift_vec;
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(SupouError::Conditioning("simulated volatility path is not finite".into()));
        }
        let mut l = DMatrix::<f64>::zeros(d * d, grid.n + 1);
        accumulate_levy(&mut l, &kept, &grid, &gamma0_vec);
        Ok(PsdPath { sigma, l, atoms: kept })
    })?;
    Ok(PsdPathBundle {
        times: grid.times(),
        dim: d,
        dt: cfg.dt,
        trunc_horizon: horizon,
        drift,
        gamma0,
        paths,
    })
}
