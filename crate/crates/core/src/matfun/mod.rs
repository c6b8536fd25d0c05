//! Dense kernels for stable matrices.

mod bounds;
mod expm;
mod lyapunov;
mod spectral;

pub use bounds::{decay_bounds, decay_bounds_auto, is_normal, modulus_of_injectivity, DecayBound, DecayMode};
pub use expm::{expm, expm_with_integral};
pub use lyapunov::{kron_sum, lyapunov_solve, lyapunov_solve_adjoint, lyapunov_solve_complex, unvec, vec};
pub use spectral::{frac_matrix_power, SpectralDecomposition};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SupouError};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn ensure_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(SupouError::InvalidArgument(format!(
            "{what}: expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("{what}: matrix has non-finite entries")));
    }
    Ok(())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Returns an error unless every eigenvalue of `a` has negative real part.
pub fn ensure_stable(a: &DMatrix<f64>) -> Result<f64> {
    let s = spectral_abscissa(a);
    if s.is_nan() || s >= 0.0 {
        return Err(SupouError::NotStable(s));
    }
    Ok(s)
}

/// Spectral (operator 2-) norm.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].abs();
    }
    a.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abscissa_of_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, -3.0, 3.0, -0.5]);
        assert!((spectral_abscissa(&a) + 0.5).abs() < 1e-12);
        assert!(ensure_stable(&(-a)).is_err());
    }

    #[test]
    fn op_norm_matches_largest_singular_value() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 5.0, 1.0]);
        let want = (27.0 + (27.0f64 * 27.0 - 4.0).sqrt()) / 2.0;
        assert!((op_norm(&a) - want.sqrt()).abs() < 1e-12);
    }
}
