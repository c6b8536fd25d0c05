//! Second-order structure of `vec(Σ₀)`.

use nalgebra::DMatrix;

use super::PSDSupOUSpec;
use crate::basis::{check_moment_conditions, pi_expectation, pi_expectation_tilted, ConditionStatus};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, kron_sum, lyapunov_solve, unvec, vec};
use crate::process::{SecondOrderSummary, THEORY_TOL};

/// Mean, variance and autocovariances of `vec(Σ₀)` (`d²`-dimensional).
///
/// The variance and autocovariances use `A ⊕ A = A ⊗ I + I ⊗ A` as the
/// stable matrix and `∫ vec(x) vec(x)ᵀ ν(dx)` as the second moment, so the
/// Lyapunov solves are `d² × d²`; this limits `d` to 3.
pub fn theoretical_psd_moments(spec: &PSDSupOUSpec, lags: &[f64]) -> Result<SecondOrderSummary> {
    let q = &spec.quadruple;
    let rep = check_moment_conditions(q, 2.0)?;
    if rep.status("moment") != Some(ConditionStatus::Holds) {
        let detail = rep.entries.iter().map(|e| format!("{}: {}", e.id, e.detail)).collect::<Vec<_>>().join("; ");
        return Err(SupouError::Moment(format!("second moments not established ({detail})")));
    }
    let d = spec.dim();
    let jump_mean = q
        .levy
        .mean()
        .ok_or_else(|| SupouError::Moment("jump mean is unavailable".into()))?;
    let c = unvec(&(q.gamma0()? + jump_mean), d);
    let mean = pi_expectation(&q.pi, |a| Ok(-lyapunov_solve(a, &c)?), THEORY_TOL)?;
    let mean = vec(&((&mean + mean.transpose()) * 0.5));
    let m = q
        .levy
        .second_moment()
        .ok_or_else(|| SupouError::Moment("second moment of the jumps is unavailable".into()))?;
    let variance = vec_acov(spec, &m, 0.0)?;
    let acov = lags
        .iter()
        .map(|&h| {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(SupouError::InvalidArgument(format!("lag must be finite and nonnegative, got {h}")));
            }
            Ok((h, if h == 0.0 { variance.clone() } else { vec_acov(spec, &m, h)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SecondOrderSummary { mean, variance, acov })
}

/// `−E_π[e^{(A⊕A)h} 𝒜(A⊕A)⁻¹ M]`; `e^{(A⊕A)h}` decays at twice the rate of
/// `e^{Ah}`, hence the tilt at `2h`.
fn vec_acov(spec: &PSDSupOUSpec, m: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let out = pi_expectation_tilted(
        &spec.quadruple.pi,
        2.0 * h,
        |a: &DMatrix<f64>, s: f64| {
            let k = kron_sum(a)?;
            let x = lyapunov_solve(&k, m)?;
            if h == 0.0 && s == 0.0 {
                return Ok(-x);
            }
            Ok(-(expm(&(&k * h + &id * s), 1.0)? * x))
        },
        THEORY_TOL,
    )?;
    Ok(if h == 0.0 { (&out + out.transpose()) * 0.5 } else { out })
}
