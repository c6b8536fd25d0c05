//! Empirical second-order moments and the method-of-moments fit of a
//! Gamma-ray supOU model (`β = 1`).

mod empirical;
mod fit;

pub use empirical::{empirical_second_order, AcovEstimate};
pub use fit::{fit_gamma_ray, fit_gamma_ray_from, FitDiagnostics, GammaRayFit};

use nalgebra::{DMatrix, DVector};

use crate::basis::{pi_expectation, MixingMeasure, Ray};
use crate::error::{Result, SupouError};
use crate::matfun::{kron_sum, unvec, vec};
use crate::process::THEORY_TOL;

/// Solves `mean = −E_π̂[A⁻¹] γ₁` and `var = −E_π̂[𝒜(A)⁻¹ M]` under the fitted
/// Gamma-ray law.
pub fn recover_levy_moments(
    mean_hat: &DVector<f64>,
    var_hat: &DMatrix<f64>,
    fit: &GammaRayFit,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = fit.b_hat.nrows();
    if mean_hat.len() != d || var_hat.shape() != (d, d) {
        return Err(SupouError::InvalidArgument(format!("moments must have dimension {d}")));
    }
    if mean_hat.iter().chain(var_hat.iter()).any(|x| !x.is_finite()) {
        return Err(SupouError::InvalidArgument("moments must be finite".into()));
    }
    if !(fit.alpha_hat > 1.0) {
        return Err(SupouError::InvalidArgument(format!("fitted alpha must exceed 1, got {}", fit.alpha_hat)));
    }
    let pi = MixingMeasure::GammaRay(Ray::new(fit.b_hat.clone(), fit.alpha_hat, 1.0)?);
    let singular = |what: &str| SupouError::Conditioning(format!("{what} map is singular"));
    let mean_map = pi_expectation(
        &pi,
        |a| a.clone().try_inverse().map(|x| -x).ok_or_else(|| singular("mixing")),
        THEORY_TOL,
    )?;
    let gamma1 = mean_map.lu().solve(mean_hat).ok_or_else(|| singular("mean"))?;
    let var_map = pi_expectation(
        &pi,
        |a| kron_sum(a)?.try_inverse().map(|x| -x).ok_or_else(|| singular("Lyapunov")),
        THEORY_TOL,
    )?;
    let sym = (var_hat + var_hat.transpose()) * 0.5;
    let m = unvec(&var_map.lu().solve(&vec(&sym)).ok_or_else(|| singular("variance"))?, d);
    Ok((gamma1, (&m + m.transpose()) * 0.5))
}
