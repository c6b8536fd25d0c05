//! First and second moments of the stationary distribution.

use nalgebra::{DMatrix, DVector};

use super::{SupOUSpec, THEORY_TOL};
use crate::basis::{pi_expectation, pi_expectation_tilted, MixingMeasure, Ray};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, frac_matrix_power, lyapunov_solve};

/// Mean, variance and autocovariances at a list of lags.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderSummary {
    pub mean: DVector<f64>,
    pub variance: DMatrix<f64>,
    pub acov: Vec<(f64, DMatrix<f64>)>,
}

fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or_else(|| SupouError::Conditioning("mixing matrix is singular".into()))
}

/// `E(X₀) = −E_π[A⁻¹] γ₁`.
pub fn theoretical_mean(spec: &SupOUSpec) -> Result<DVector<f64>> {
    spec.require_second_moments()?;
    let g1 = DMatrix::from_column_slice(spec.dim(), 1, spec.quadruple.gamma1()?.as_slice());
    let e = pi_expectation(&spec.quadruple.pi, |a| Ok(-(inverse(a)? * &g1)), THEORY_TOL)?;
    Ok(e.column(0).into_owned())
}

/// `var(X₀) = −E_π[𝒜(A)⁻¹ M]` with `M = Σ + ∫ x xᵀ ν(dx)`.
pub fn theoretical_var(spec: &SupOUSpec) -> Result<DMatrix<f64>> {
    theoretical_acov(spec, 0.0)
}

/// `cov(X_h, X₀) = −E_π[e^{Ah} 𝒜(A)⁻¹ M]`.
pub fn theoretical_acov(spec: &SupOUSpec, h: f64) -> Result<DMatrix<f64>> {
    spec.require_second_moments()?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("lag must be finite and nonnegative, got {h}")));
    }
    let m = spec.quadruple.second_moment()?;
    acov_from_moment(&spec.quadruple.pi, &m, h)
}

pub(crate) fn acov_from_moment(pi: &MixingMeasure, m: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let out = pi_expectation_tilted(
        pi,
        h,
        |a: &DMatrix<f64>, s: f64| {
            let x = lyapunov_solve(a, m)?;
            if h == 0.0 && s == 0.0 {
                return Ok(-x);
            }
            // e^{s} e^{Ah} = e^{Ah + sI}
            let e = expm(&(a * h + &id * s), 1.0)?;
            Ok(-(e * x))
        },
        THEORY_TOL,
    )?;
    Ok(if h == 0.0 { (&out + out.transpose()) * 0.5 } else { out })
}

/// Mean, variance and the autocovariances at `lags`.
pub fn second_order_summary(spec: &SupOUSpec, lags: &[f64]) -> Result<SecondOrderSummary> {
    let mean = theoretical_mean(spec)?;
    let variance = theoretical_var(spec)?;
    let acov = lags.iter().map(|&h| Ok((h, theoretical_acov(spec, h)?))).collect::<Result<Vec<_>>>()?;
    Ok(SecondOrderSummary { mean, variance, acov })
}

/// `−(β^α/(α−1)) (βI − Bh)^{1−α} 𝒜(B)⁻¹ M` for `π = Gamma(α, β) · B`.
pub fn acov_gamma_ray_closed_form(
    b: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
    m: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("lag must be finite and nonnegative, got {h}")));
    }
    Ray::new(b.clone(), alpha, beta)?;
    let d = b.nrows();
    let base = DMatrix::<f64>::identity(d, d) * beta - b * h;
    let power = frac_matrix_power(&base, 1.0 - alpha)?;
    let x = lyapunov_solve(b, m)?;
    let c = (alpha * beta.ln()).exp() / (alpha - 1.0);
    Ok(-(power * x) * c)
}

/// Weighted sum of [`acov_gamma_ray_closed_form`] over several rays.
pub fn acov_multi_gamma_ray_closed_form(rays: &[(f64, Ray)], m: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (w, r) in rays {
        out += acov_gamma_ray_closed_form(&r.b, r.alpha, r.beta, m, h)? * *w;
    }
    Ok(out)
}
