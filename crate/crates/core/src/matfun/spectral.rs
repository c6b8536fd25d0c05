//! Complex eigendecomposition and principal fractional powers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ensure_finite, ensure_square, CMatrix};
use crate::error::{Result, SupouError};

/// Eigenvector matrices with condition number above this are treated as
/// defective.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;

const CLUSTER_TOL: f64 = 1e-8;
const NULL_TOL: f64 = 1e-6;
const RECON_TOL: f64 = 1e-8;

/// `A = U diag(λ) U⁻¹` over the complex numbers.
///
/// Columns of `U` belonging to simple eigenvalues are scaled so that their
/// first nonzero entry is one. Columns spanning a repeated eigenvalue are an
/// orthonormal basis of the eigenspace.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<Complex64>,
    pub right_vectors: CMatrix,
    pub inverse_vectors: CMatrix,
    pub is_diagonalizable: bool,
    pub condition_estimate: f64,
}

impl SpectralDecomposition {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        ensure_square(a, "spectral decomposition")?;
        ensure_finite(a, "spectral decomposition")?;
        let d = a.nrows();
        let scale = a.norm().max(1.0);
        let eigs: Vec<Complex64> = if d == 1 {
            vec![Complex64::new(a[(0, 0)], 0.0)]
        } else {
            a.complex_eigenvalues().iter().copied().collect()
        };

        let clusters = cluster(&eigs, CLUSTER_TOL * scale);
        let ac: CMatrix = a.map(|x| Complex64::new(x, 0.0));
        let mut u = CMatrix::zeros(d, d);
        let mut lambda = DVector::from_element(d, Complex64::new(0.0, 0.0));
        let mut col = 0;
        let mut defective = false;
        for members in &clusters {
            let m = members.len();
            let center = members.iter().map(|&i| eigs[i]).sum::<Complex64>() / m as f64;
            let shifted = &ac - CMatrix::identity(d, d) * center;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.expect("right singular vectors requested");
            let sv = &svd.singular_values;
            // nalgebra returns singular values in descending order.
            if sv[d - m] > NULL_TOL * scale {
                defective = true;
            }
            for k in 0..m {
                let mut v: DVector<Complex64> = v_t.row(d - m + k).adjoint().into_owned();
                if m == 1 {
                    normalize_first_nonzero(&mut v);
                }
                u.set_column(col, &v);
                lambda[col] = if m == 1 { eigs[members[0]] } else { center };
                col += 1;
            }
        }

        let usv = u.clone().svd(false, false).singular_values;
        let smin = usv.min();
        let cond = if smin > 0.0 { usv.max() / smin } else { f64::INFINITY };
        let inverse = if cond.is_finite() { u.clone().try_inverse() } else { None };
        let inverse_vectors = match inverse {
            Some(inv) => inv,
            None => {
                return Ok(Self {
                    eigenvalues: lambda,
                    right_vectors: u,
                    inverse_vectors: CMatrix::zeros(d, d),
                    is_diagonalizable: false,
                    condition_estimate: f64::INFINITY,
                })
            }
        };
        let recon = &u * CMatrix::from_diagonal(&lambda) * &inverse_vectors;
        let err = (recon - &ac).norm();
        let is_diagonalizable = !defective && cond <= MAX_EIGVEC_CONDITION && err <= RECON_TOL * scale;
        Ok(Self {
            eigenvalues: lambda,
            right_vectors: u,
            inverse_vectors,
            is_diagonalizable,
            condition_estimate: cond,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn require_diagonalizable(&self) -> Result<()> {
        if self.is_diagonalizable {
            Ok(())
        } else {
            Err(SupouError::Conditioning(format!(
                "matrix is not diagonalizable within tolerance (eigenvector condition {:.3e})",
                self.condition_estimate
            )))
        }
    }

    /// `U diag(f(λ_i)) U⁻¹`.
    pub fn apply(&self, f: impl Fn(Complex64) -> Complex64) -> CMatrix {
        let fl = self.eigenvalues.map(f);
        &self.right_vectors * CMatrix::from_diagonal(&fl) * &self.inverse_vectors
    }

    /// `U diag(f(λ_i)) U⁻¹` projected to a real matrix. Fails when the
    /// discarded imaginary part exceeds `1e-8` of the result norm.
    pub fn apply_real(&self, f: impl Fn(Complex64) -> Complex64) -> Result<DMatrix<f64>> {
        self.require_diagonalizable()?;
        real_part_checked(&self.apply(f))
    }
}

pub(crate) fn real_part_checked(m: &CMatrix) -> Result<DMatrix<f64>> {
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let tol = 1e-8 * re.norm().max(f64::MIN_POSITIVE);
    if im.norm() > tol {
        return Err(SupouError::Conditioning(format!(
            "imaginary residue {:.3e} exceeds tolerance {:.3e}",
            im.norm(),
            tol
        )));
    }
    Ok(re)
}

fn normalize_first_nonzero(v: &mut DVector<Complex64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    if let Some(pivot) = v.iter().copied().find(|z| z.norm() > 1e-10 * norm) {
        *v /= pivot;
    }
}

fn cluster(eigs: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = eigs.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() <= tol {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                if ri != rj {
                    label[rj] = ri;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = root(&mut label, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => groups[k].push(i),
            None => {
                roots.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Principal power `M^p = U diag(exp(p Log λ_i)) U⁻¹`.
pub fn frac_matrix_power(m: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    if !p.is_finite() {
        return Err(SupouError::InvalidArgument(format!("frac_matrix_power: exponent {p} is not finite")));
    }
    let dec = SpectralDecomposition::new(m)?;
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for z in dec.eigenvalues.iter() {
        if z.re <= 0.0 && z.im.abs() <= 1e-12 * scale {
            return Err(SupouError::BranchCut(format!("{z}")));
        }
    }
    dec.apply_real(|z| (z.ln() * p).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_power() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let r = frac_matrix_power(&i3, -0.5).unwrap();
        assert!((r - i3).norm() < 1e-14);
    }

    #[test]
    fn scalar_powers() {
        let r = frac_matrix_power(&DMatrix::from_element(1, 1, 4.0), 0.5).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15);
        let r = frac_matrix_power(&DMatrix::from_element(1, 1, 2.0), -1.0).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn branch_cut_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(frac_matrix_power(&m, 0.5), Err(SupouError::BranchCut(_))));
    }

    #[test]
    fn jordan_block_is_not_diagonalizable() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let dec = SpectralDecomposition::new(&m).unwrap();
        assert!(!dec.is_diagonalizable);
        assert!(matches!(frac_matrix_power(&m, 0.5), Err(SupouError::Conditioning(_))));
    }

    #[test]
    fn repeated_eigenvalue_with_full_eigenspace() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let dec = SpectralDecomposition::new(&m).unwrap();
        assert!(dec.is_diagonalizable);
        let r = frac_matrix_power(&m, 2.0).unwrap();
        assert!((r - &m * &m).norm() < 1e-12);
    }

    #[test]
    fn complex_pair_recomposes_real() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, 1.0, 3.0]);
        let half = frac_matrix_power(&m, 0.5).unwrap();
        assert!((&half * &half - &m).norm() < 1e-12);
    }

    #[test]
    fn simple_columns_start_with_one() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        let a = &s * DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]) * s.clone().try_inverse().unwrap();
        let dec = SpectralDecomposition::new(&a).unwrap();
        for j in 0..2 {
            let col = dec.right_vectors.column(j);
            let first = col.iter().find(|z| z.norm() > 1e-10).unwrap();
            assert!((first - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let ui = &dec.right_vectors * &dec.inverse_vectors;
        assert!((ui - CMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
