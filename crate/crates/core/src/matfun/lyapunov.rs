//! Lyapunov solves through the Kronecker-sum representation.

use nalgebra::{DMatrix, DVector};

use super::{ensure_finite, ensure_square, ensure_stable, CMatrix};
use crate::error::{Result, SupouError};
use num_complex::Complex64;

/// Largest dimension accepted by the dense `d² × d²` solve.
pub const MAX_LYAPUNOV_DIM: usize = 10;

const RESIDUAL_TOL: f64 = 1e-8;

/// Column-stacking `vec`.
pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`] for a `d × d` matrix.
pub fn unvec(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), d * d, "unvec: length mismatch");
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// `A ⊗ I + I ⊗ A`.
pub fn kron_sum(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(a, "kron_sum")?;
    ensure_finite(a, "kron_sum")?;
    Ok(kron_sum_unchecked(a))
}

pub(crate) fn kron_sum_unchecked(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    a.kronecker(&id) + id.kronecker(a)
}

/// Solves `A X + X Aᵀ = C`.
pub fn lyapunov_solve(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(a, "lyapunov_solve")?;
    ensure_finite(a, "lyapunov_solve")?;
    ensure_finite(c, "lyapunov_solve")?;
    let d = a.nrows();
    if c.nrows() != d || c.ncols() != d {
        return Err(SupouError::InvalidArgument(format!(
            "lyapunov_solve: right-hand side is {}x{}, expected {d}x{d}",
            c.nrows(),
            c.ncols()
        )));
    }
    if d > MAX_LYAPUNOV_DIM {
        return Err(SupouError::InvalidArgument(format!(
            "lyapunov_solve: dimension {d} exceeds {MAX_LYAPUNOV_DIM}"
        )));
    }
    ensure_stable(a)?;
    lyapunov_solve_stable(a, c)
}

/// Same as [`lyapunov_solve`] for a matrix already known to be stable.
pub(crate) fn lyapunov_solve_stable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if d == 1 {
        return Ok(DMatrix::from_element(1, 1, c[(0, 0)] / (2.0 * a[(0, 0)])));
    }
    let k = kron_sum_unchecked(a);
    let x = k
        .lu()
        .solve(&vec(c))
        .ok_or_else(|| SupouError::Conditioning("Lyapunov operator is singular".into()))?;
    let x = unvec(&x, d);
    let resid = (a * &x + &x * a.transpose() - c).norm();
    let scale = c.norm().max(f64::MIN_POSITIVE);
    if resid > RESIDUAL_TOL * scale && resid > 1e-300 {
        return Err(SupouError::Conditioning(format!(
            "Lyapunov residual {resid:.3e} exceeds {:.3e}",
            RESIDUAL_TOL * scale
        )));
    }
    Ok(x)
}

/// Solves `Aᵀ X + X A = C`.
pub fn lyapunov_solve_adjoint(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    lyapunov_solve(&a.transpose(), c)
}

/// Solves `A X + X Aᵀ = C` for complex `C` by splitting real and imaginary parts.
pub fn lyapunov_solve_complex(a: &DMatrix<f64>, c: &CMatrix) -> Result<CMatrix> {
    let re = lyapunov_solve(a, &c.map(|z| z.re))?;
    let im = lyapunov_solve(a, &c.map(|z| z.im))?;
    Ok(re.zip_map(&im, Complex64::new))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_identity() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let x = lyapunov_solve(&a, &a).unwrap();
        assert!((x - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn diagonal_entrywise_division() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let x = lyapunov_solve(&a, &DMatrix::from_element(2, 2, 1.0)).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[-0.5, -1.0 / 3.0, -1.0 / 3.0, -0.25]);
        assert!((x - want).norm() < 1e-15);
    }

    #[test]
    fn rejects_unstable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        let c = DMatrix::identity(2, 2);
        assert!(matches!(lyapunov_solve(&a, &c), Err(SupouError::NotStable(_))));
    }

    #[test]
    fn kron_sum_small_cases() {
        assert_eq!(kron_sum(&DMatrix::from_element(1, 1, -1.0)).unwrap()[(0, 0)], -2.0);
        let k = kron_sum(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0])).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -3.0, -3.0, -4.0]));
        assert_eq!(k, want);
        assert_eq!(kron_sum(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::zeros(9, 9));
    }

    #[test]
    fn vec_is_column_stacking() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&x).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&x), 2), x);
    }

    #[test]
    fn adjoint_solves_transposed_equation() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let x = lyapunov_solve_adjoint(&a, &c).unwrap();
        assert!((a.transpose() * &x + &x * &a - c).norm() < 1e-13);
    }
}
