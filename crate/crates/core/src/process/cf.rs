//! Characteristic function of the stationary distribution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{SupOUSpec, THEORY_TOL};
use crate::basis::quadrature::integrate_adaptive;
use crate::basis::pi_expectation;
use crate::error::{Result, SupouError};
use crate::matfun::{decay_bounds_auto, expm, lyapunov_solve};

/// The `s`-integral is cut where `κ e^{−ρ s}` drops below this level.
const KERNEL_CUTOFF: f64 = 1e-10;

/// `log E exp(i⟨u, X₀⟩)`.
pub fn log_characteristic_function(spec: &SupOUSpec, u: &DVector<f64>) -> Result<Complex64> {
    let q = &spec.quadruple;
    let d = spec.dim();
    if u.len() != d || u.iter().any(|x| !x.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("argument must be a finite vector of length {d}")));
    }
    if u.iter().all(|&x| x == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let gamma0 = q.gamma0()?;
    let sigma = q.gaussian.clone().filter(|_| q.has_gaussian());
    let rate = q.levy.rate;
    let jumps = &q.levy.jumps;
    let uc: DVector<Complex64> = u.map(|x| Complex64::new(x, 0.0));
    // Probe the jump transform once so unsupported laws fail before quadrature.
    if rate > 0.0 {
        jumps.cf(&uc)?;
    }
    let e = pi_expectation(
        &q.pi,
        |a| {
            let inv = a.clone().try_inverse().ok_or_else(|| SupouError::Conditioning("singular mixing matrix".into()))?;
            // ∫₀^∞ ⟨γ₀, e^{Aᵀs}u⟩ ds = ⟨−A⁻¹γ₀, u⟩
            let drift = -(inv * &gamma0).dot(u);
            let mut gauss = 0.0;
            if let Some(s) = &sigma {
                let v = -lyapunov_solve(a, s)?;
                gauss = -0.5 * (u.transpose() * v * u)[(0, 0)];
            }
            let (mut jre, mut jim) = (0.0, 0.0);
            if rate > 0.0 {
                let b = decay_bounds_auto(a)?;
                let at = a.transpose();
                let upper = (b.kappa / KERNEL_CUTOFF).ln();
                let mut err = None;
                let val = integrate_adaptive(
                    |sig, out: &mut [f64]| {
                        let w = match expm(&at, sig / b.rho) {
                            Ok(e) => e * u,
                            Err(e) => {
                                err = Some(e);
                                out.fill(0.0);
                                return;
                            }
                        };
                        let wc = w.map(|x| Complex64::new(x, 0.0));
                        match jumps.cf(&wc) {
                            Ok(c) => {
                                out[0] = c.re - 1.0;
                                out[1] = c.im;
                            }
                            Err(e) => {
                                err = Some(e);
                                out.fill(0.0);
                            }
                        }
                    },
                    0.0,
                    upper,
                    2,
                    1e-14,
                    1e-11,
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                jre = rate * val[0] / b.rho;
                jim = rate * val[1] / b.rho;
            }
            Ok(DMatrix::from_row_slice(1, 2, &[gauss + jre, drift + jim]))
        },
        THEORY_TOL,
    )?;
    Ok(Complex64::new(e[(0, 0)], e[(0, 1)]))
}

/// `E exp(i⟨u, X₀⟩)`.
pub fn characteristic_function(spec: &SupOUSpec, u: &DVector<f64>) -> Result<Complex64> {
    Ok(log_characteristic_function(spec, u)?.exp())
}
