//! Integrated volatility and the SDE representation of `Σ`.

use nalgebra::DMatrix;

use super::simulate::propagate_factor;
use super::{vec_atom, PSDSupOUSpec, PsdPathBundle};
use crate::basis::{check_path_conditions, ConditionStatus, PoissonAtom};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, kron_sum, unvec, vec};
use crate::process::pathwise::{integrated_z_atoms, Carry};
use crate::process::{Grid, IntegratedPaths, ZIntegration};

fn require(spec: &PSDSupOUSpec, ids: &[&str]) -> Result<()> {
    let report = check_path_conditions(&spec.quadruple)?;
    for id in ids {
        if report.status(id) != Some(ConditionStatus::Holds) {
            let detail = report.get(id).map(|e| e.detail.clone()).unwrap_or_default();
            return Err(SupouError::Precondition(format!("path condition {id} does not hold: {detail}")));
        }
    }
    Ok(())
}

fn check_bundle(bundle: &PsdPathBundle, spec: &PSDSupOUSpec) -> Result<()> {
    if bundle.paths.is_empty() {
        return Err(SupouError::NeedsAtoms("bundle holds no paths".into()));
    }
    if bundle.dim != spec.dim() {
        return Err(SupouError::InvalidArgument("bundle and spec differ in dimension".into()));
    }
    Ok(())
}

/// `e^{A(a−s)} x e^{Aᵀ(a−s)}` at `a = max(t_start, s)`.
fn start_value(atom: &PoissonAtom, grid: &Grid, d: usize) -> Result<(f64, DMatrix<f64>)> {
    let x = unvec(&atom.jump, d);
    if atom.time >= grid.t_start {
        Ok((atom.time, x))
    } else {
        let e = expm(&atom.a, grid.t_start - atom.time)?;
        Ok((grid.t_start, &e * x * e.transpose()))
    }
}

/// `Σ_t⁺ = ∫_{t_start}^t Σ_u du` on the grid: atom-wise
/// `𝐀(A)⁻¹(e^{A(t−s)} x e^{Aᵀ(t−s)} − e^{A(a−s)} x e^{Aᵀ(a−s)})` plus the
/// drift part, and the trapezoid rule for comparison. Matrices are in `vec`
/// form.
pub fn integrated_cov(bundle: &PsdPathBundle, spec: &PSDSupOUSpec) -> Result<IntegratedPaths> {
    check_bundle(bundle, spec)?;
    require(spec, &["condbound"])?;
    let grid = bundle.grid();
    let d = bundle.dim;
    let drift = vec(&bundle.drift);
    let mut analytic = Vec::with_capacity(bundle.paths.len());
    let mut trapezoid = Vec::with_capacity(bundle.paths.len());
    for path in &bundle.paths {
        let rows = d * d;
        let mut exact = DMatrix::<f64>::zeros(rows, grid.n + 1);
        let mut trap = DMatrix::<f64>::zeros(rows, grid.n + 1);
        let mut carry_e = Carry::new(rows, grid.n);
        let mut carry_t = Carry::new(rows, grid.n);
        for atom in &path.atoms {
            let (a_t, sa) = start_value(atom, &grid, d)?;
            let lu = kron_sum(&atom.a)?.lu();
            let sa_vec = vec(&sa);
            let mut state: Option<(usize, DMatrix<f64>, nalgebra::DVector<f64>, nalgebra::DVector<f64>)> = None;
            let mut failure = None;
            propagate_factor(atom, &grid, d, |k, s| {
                let s_vec = vec(s);
                let ik = match lu.solve(&(&s_vec - &sa_vec)) {
                    Some(x) => x,
                    None => {
                        failure = Some(SupouError::Conditioning("Lyapunov operator is singular".into()));
                        s_vec.clone() * 0.0
                    }
                };
                let tk = match &state {
                    None => (&sa_vec + &s_vec) * (0.5 * (grid.time(k) - a_t)),
                    Some((_, s_prev, _, t_prev)) => t_prev + (vec(s_prev) + &s_vec) * (0.5 * grid.dt),
                };
                let mut ce = exact.column_mut(k);
                ce += &ik;
                let mut ct = trap.column_mut(k);
                ct += &tk;
                state = Some((k, s.clone(), ik, tk));
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            if let Some((k, _, ik, tk)) = state {
                if k < grid.n {
                    carry_e.add_from(k + 1, &ik);
                    carry_t.add_from(k + 1, &tk);
                }
            }
        }
        carry_e.apply(&mut exact);
        carry_t.apply(&mut trap);
        for k in 0..=grid.n {
            let dr = &drift * (grid.time(k) - grid.t_start);
            let mut ce = exact.column_mut(k);
            ce += &dr;
            let mut ct = trap.column_mut(k);
            ct += &dr;
        }
        analytic.push(exact);
        trapezoid.push(trap);
    }
    Ok(IntegratedPaths { analytic, trapezoid })
}

/// `max_k ‖Σ_{t_k} − Σ_{t_0} − ∫_{t_0}^{t_k} Z du − L_{t_k}‖_F` for every path,
/// with `Z_u` the atom-wise `A S + S Aᵀ` of each kernel term minus `γ₀`.
pub fn psd_sde_residual(bundle: &PsdPathBundle, spec: &PSDSupOUSpec, mode: ZIntegration) -> Result<Vec<f64>> {
    check_bundle(bundle, spec)?;
    require(spec, &["finite_variation", "exZcond", "boundZcond"])?;
    let grid = bundle.grid();
    let d = bundle.dim;
    let gamma0 = vec(&bundle.gamma0);
    bundle
        .paths
        .iter()
        .map(|path| {
            let atoms = path.atoms.iter().map(vec_atom).collect::<Result<Vec<_>>>()?;
            let mut intz = integrated_z_atoms(&atoms, &grid, d * d, mode, |k, v| k * v)?;
            for k in 0..=grid.n {
                let mut c = intz.column_mut(k);
                c -= &gamma0 * (grid.time(k) - grid.t_start);
            }
            let s0 = path.sigma.column(0);
            Ok((0..=grid.n)
                .map(|k| (path.sigma.column(k) - s0 - intz.column(k) - path.l.column(k)).norm())
                .fold(0.0, f64::max))
        })
        .collect()
}
