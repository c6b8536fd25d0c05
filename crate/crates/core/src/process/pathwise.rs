//! Integrated process and the SDE representation `X_t = X₀ + ∫Z du + L_t`.

use nalgebra::{DMatrix, DVector};

use super::simulate::propagate_atom;
use super::{Grid, PathBundle, SamplePath, SupOUSpec};
use crate::basis::{check_path_conditions, ConditionStatus, PoissonAtom};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, expm_with_integral};

/// How `∫ Z du` is formed in [`sde_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZIntegration {
    /// Exact per-atom integral `e^{A(t−s)}x − e^{A(a−s)}x`.
    Analytic,
    /// Per-atom trapezoid rule on the grid, with the atom time as an extra node.
    Trapezoid,
}

/// `X_t^+ = ∫_{t_start}^t X_u du` on the grid, in closed form and by the
/// trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedPaths {
    pub analytic: Vec<DMatrix<f64>>,
    pub trapezoid: Vec<DMatrix<f64>>,
}

/// Per-column constants that switch on at a given index.
pub(crate) struct Carry {
    m: DMatrix<f64>,
}

impl Carry {
    pub(crate) fn new(rows: usize, n: usize) -> Self {
        Self { m: DMatrix::zeros(rows, n + 2) }
    }

    pub(crate) fn add_from(&mut self, k: usize, v: &DVector<f64>) {
        let mut c = self.m.column_mut(k);
        c += v;
    }

    pub(crate) fn apply(self, out: &mut DMatrix<f64>) {
        let mut run = DVector::zeros(out.nrows());
        for k in 0..out.ncols() {
            run += self.m.column(k);
            let mut c = out.column_mut(k);
            c += &run;
        }
    }
}

/// Value `e^{A(a−s)} x` of an atom's kernel at `a = max(t_start, s)`.
fn start_value(atom: &PoissonAtom, grid: &Grid) -> Result<(f64, DVector<f64>)> {
    if atom.time >= grid.t_start {
        Ok((atom.time, atom.jump.clone()))
    } else {
        Ok((grid.t_start, expm(&atom.a, grid.t_start - atom.time)? * &atom.jump))
    }
}

fn ensure_atoms(bundle: &PathBundle) -> Result<()> {
    if bundle.paths.is_empty() {
        return Err(SupouError::NeedsAtoms("bundle holds no paths".into()));
    }
    Ok(())
}

fn check_path_spec(bundle: &PathBundle, spec: &SupOUSpec) -> Result<()> {
    if bundle.dim != spec.dim() {
        return Err(SupouError::InvalidArgument("bundle and spec differ in dimension".into()));
    }
    Ok(())
}

/// Closed-form and trapezoid integrals of every path in `bundle`.
pub fn integrated_process(bundle: &PathBundle, spec: &SupOUSpec) -> Result<IntegratedPaths> {
    ensure_atoms(bundle)?;
    check_path_spec(bundle, spec)?;
    let grid = bundle.grid();
    let mut analytic = Vec::with_capacity(bundle.paths.len());
    let mut trapezoid = Vec::with_capacity(bundle.paths.len());
    for path in &bundle.paths {
        let (a, t) = integrate_path(path, bundle, &grid)?;
        analytic.push(a);
        trapezoid.push(t);
    }
    Ok(IntegratedPaths { analytic, trapezoid })
}

pub(crate) fn integrate_atoms(
    atoms: &[PoissonAtom],
    grid: &Grid,
    rows: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut exact = DMatrix::<f64>::zeros(rows, grid.n + 1);
    let mut trap = DMatrix::<f64>::zeros(rows, grid.n + 1);
    let mut carry_e = Carry::new(rows, grid.n);
    let mut carry_t = Carry::new(rows, grid.n);
    for atom in atoms {
        let (a_t, xa) = start_value(atom, grid)?;
        let (_, f_dt) = expm_with_integral(&atom.a, grid.dt)?;
        let mut state: Option<(usize, DVector<f64>, DVector<f64>, DVector<f64>)> = None;
        let mut failure = None;
        propagate_atom(atom, grid, |k, u| {
            let (ik, tk) = match &state {
                None => {
                    let gap = grid.time(k) - a_t;
                    match expm_with_integral(&atom.a, gap) {
                        Ok((_, f1)) => (f1 * &xa, (&xa + u) * (0.5 * gap)),
                        Err(e) => {
                            failure = Some(e);
                            (DVector::zeros(rows), DVector::zeros(rows))
                        }
                    }
                }
                Some((_, u_prev, i_prev, t_prev)) => {
                    (i_prev + &f_dt * u_prev, t_prev + (u_prev + u) * (0.5 * grid.dt))
                }
            };
            let mut ce = exact.column_mut(k);
            ce += &ik;
            let mut ct = trap.column_mut(k);
            ct += &tk;
            state = Some((k, u.clone(), ik, tk));
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
    Ok((exact, trap))
}

fn integrate_path(path: &SamplePath, bundle: &PathBundle, grid: &Grid) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = bundle.dim;
    let (mut exact, mut trap) = integrate_atoms(&path.atoms, grid, d)?;
    for k in 0..=grid.n {
        let drift = &bundle.drift_x * (grid.time(k) - grid.t_start);
        let mut ce = exact.column_mut(k);
        ce += &drift;
        let mut ct = trap.column_mut(k);
        ct += &drift;
    }
    for track in &path.gaussian {
        let inv = track.a.clone().try_inverse().ok_or_else(|| SupouError::Conditioning("singular atom".into()))?;
        let g0 = track.g.column(0).into_owned();
        let mut run = DVector::zeros(d);
        for k in 0..=grid.n {
            let gk = track.g.column(k).into_owned();
            let e = &inv * (&gk - &g0 - track.w.column(k));
            let mut ce = exact.column_mut(k);
            ce += &e;
            if k > 0 {
                run += (track.g.column(k - 1) + &gk) * (0.5 * grid.dt);
            }
            let mut ct = trap.column_mut(k);
            ct += &run;
        }
    }
    Ok((exact, trap))
}

/// `max_k ‖X_{t_k} − X_{t_0} − ∫_{t_0}^{t_k} Z du − L_{t_k}‖` for every path.
pub fn sde_residual(bundle: &PathBundle, spec: &SupOUSpec, mode: ZIntegration) -> Result<Vec<f64>> {
    ensure_atoms(bundle)?;
    check_path_spec(bundle, spec)?;
    let report = check_path_conditions(&spec.quadruple)?;
    for id in ["finite_variation", "exZcond", "boundZcond"] {
        if report.status(id) != Some(ConditionStatus::Holds) {
            let detail = report.get(id).map(|e| e.detail.clone()).unwrap_or_default();
            return Err(SupouError::Precondition(format!("path condition {id} does not hold: {detail}")));
        }
    }
    let grid = bundle.grid();
    bundle
        .paths
        .iter()
        .map(|path| {
            let intz = integrated_z(path, bundle, &grid, mode)?;
            let x0 = path.x.column(0);
            Ok((0..=grid.n)
                .map(|k| (path.x.column(k) - x0 - intz.column(k) - path.l.column(k)).norm())
                .fold(0.0, f64::max))
        })
        .collect()
}

pub(crate) fn integrated_z_atoms(
    atoms: &[PoissonAtom],
    grid: &Grid,
    rows: usize,
    mode: ZIntegration,
    z_of: impl Fn(&DMatrix<f64>, &DVector<f64>) -> DVector<f64>,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::<f64>::zeros(rows, grid.n + 1);
    let mut carry = Carry::new(rows, grid.n);
    for atom in atoms {
        let (a_t, xa) = start_value(atom, grid)?;
        let za = z_of(&atom.a, &xa);
        let mut state: Option<(usize, DVector<f64>, DVector<f64>)> = None;
        let mut failure = None;
        propagate_atom(atom, grid, |k, u| {
            let (val, zu) = match mode {
                ZIntegration::Analytic => match expm(&atom.a, grid.time(k) - atom.time) {
                    Ok(e) => (value_of_kernel(&e, &atom.jump, rows, &xa), DVector::zeros(0)),
                    Err(e) => {
                        failure = Some(e);
                        (DVector::zeros(rows), DVector::zeros(0))
                    }
                },
                ZIntegration::Trapezoid => {
                    let zu = z_of(&atom.a, u);
                    let val = match &state {
                        None => (&za + &zu) * (0.5 * (grid.time(k) - a_t)),
                        Some((_, z_prev, v_prev)) => v_prev + (z_prev + &zu) * (0.5 * grid.dt),
                    };
                    (val, zu)
                }
            };
            let mut c = out.column_mut(k);
            c += &val;
            state = Some((k, zu, val));
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some((k, _, val)) = state {
            if k < grid.n {
                carry.add_from(k + 1, &val);
            }
        }
    }
    carry.apply(&mut out);
    Ok(out)
}

/// `e^{A(t−s)} x − e^{A(a−s)} x` for a vector mark.
fn value_of_kernel(e: &DMatrix<f64>, x: &DVector<f64>, rows: usize, xa: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(x.len(), rows);
    e * x - xa
}

fn integrated_z(path: &SamplePath, bundle: &PathBundle, grid: &Grid, mode: ZIntegration) -> Result<DMatrix<f64>> {
    let d = bundle.dim;
    let mut out = integrated_z_atoms(&path.atoms, grid, d, mode, |a, v| a * v)?;
    for k in 0..=grid.n {
        let mut c = out.column_mut(k);
        c -= &bundle.gamma0 * (grid.time(k) - grid.t_start);
    }
    for track in &path.gaussian {
        let g0 = track.g.column(0).into_owned();
        let mut run = DVector::zeros(d);
        for k in 0..=grid.n {
            let gk = track.g.column(k).into_owned();
            let add = match mode {
                ZIntegration::Analytic => &gk - &g0 - track.w.column(k),
                ZIntegration::Trapezoid => {
                    if k > 0 {
                        run += &track.a * (track.g.column(k - 1) + &gk) * (0.5 * grid.dt);
                    }
                    run.clone()
                }
            };
            let mut c = out.column_mut(k);
            c += &add;
        }
    }
    Ok(out)
}
