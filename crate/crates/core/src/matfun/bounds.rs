//! Modulus of injectivity and exponential decay bounds.

use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square, SpectralDecomposition};
use crate::error::{Result, SupouError};

const NORMALITY_TOL: f64 = 1e-10;

/// Constants with `‖e^{As}‖ ≤ κ e^{−ρ s}` and `j(e^{As}) ≥ ϑ e^{−τ s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub kappa: f64,
    pub rho: f64,
    pub theta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    Normal,
    Diagonalizable,
}

/// `j(Z) = min_{‖x‖=1} ‖Z x‖`, the smallest singular value.
pub fn modulus_of_injectivity(z: &DMatrix<f64>) -> Result<f64> {
    ensure_square(z, "modulus_of_injectivity")?;
    ensure_finite(z, "modulus_of_injectivity")?;
    if z.nrows() == 1 {
        return Ok(z[(0, 0)].abs());
    }
    Ok(z.singular_values().min())
}

pub fn is_normal(a: &DMatrix<f64>) -> bool {
    let at = a.transpose();
    let comm = a * &at - &at * a;
    comm.norm() <= NORMALITY_TOL * a.norm_squared().max(1.0)
}

pub fn decay_bounds(a: &DMatrix<f64>, mode: DecayMode) -> Result<DecayBound> {
    ensure_square(a, "decay_bounds")?;
    ensure_finite(a, "decay_bounds")?;
    let (max_re, min_re) = spectrum_real_range(a);
    if max_re.is_nan() || max_re >= 0.0 {
        return Err(SupouError::NotStable(max_re));
    }
    let (rho, tau) = (-max_re, -min_re);
    match mode {
        DecayMode::Normal => {
            if !is_normal(a) {
                return Err(SupouError::ModeMismatch(
                    "mode=normal requested for a matrix that is not normal".into(),
                ));
            }
            Ok(DecayBound { kappa: 1.0, rho, theta: 1.0, tau })
        }
        DecayMode::Diagonalizable => {
            let dec = SpectralDecomposition::new(a)?;
            dec.require_diagonalizable()?;
            let sv = dec.right_vectors.clone().svd(false, false).singular_values;
            // ‖U‖‖U⁻¹‖ = σ_max/σ_min and j(U) j(U⁻¹) = σ_min/σ_max.
            let kappa = (sv.max() / sv.min()).max(1.0);
            Ok(DecayBound { kappa, rho, theta: 1.0 / kappa, tau })
        }
    }
}

/// Normal mode when `a` is normal, diagonalizable mode otherwise.
pub fn decay_bounds_auto(a: &DMatrix<f64>) -> Result<DecayBound> {
    if is_normal(a) {
        decay_bounds(a, DecayMode::Normal)
    } else {
        decay_bounds(a, DecayMode::Diagonalizable)
    }
}

fn spectrum_real_range(a: &DMatrix<f64>) -> (f64, f64) {
    if a.nrows() == 1 {
        return (a[(0, 0)], a[(0, 0)]);
    }
    let eig = a.complex_eigenvalues();
    let max = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    (max, min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn normal_examples() {
        let b = decay_bounds(&-DMatrix::<f64>::identity(2, 2), DecayMode::Normal).unwrap();
        assert_eq!(b, DecayBound { kappa: 1.0, rho: 1.0, theta: 1.0, tau: 1.0 });
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]));
        let b = decay_bounds(&a, DecayMode::Normal).unwrap();
        assert!((b.rho - 1.0).abs() < 1e-14 && (b.tau - 3.0).abs() < 1e-14);
    }

    #[test]
    fn mode_mismatch() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 5.0, 0.0, -2.0]);
        assert!(matches!(decay_bounds(&a, DecayMode::Normal), Err(SupouError::ModeMismatch(_))));
        assert!(decay_bounds_auto(&a).unwrap().kappa > 1.0);
    }

    #[test]
    fn unstable_rejected() {
        let a = DMatrix::from_element(1, 1, 0.0);
        assert!(matches!(decay_bounds(&a, DecayMode::Normal), Err(SupouError::NotStable(_))));
    }

    #[test]
    fn injectivity_small_cases() {
        assert_eq!(modulus_of_injectivity(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((modulus_of_injectivity(&z).unwrap() - 2.0).abs() < 1e-14);
    }
}
