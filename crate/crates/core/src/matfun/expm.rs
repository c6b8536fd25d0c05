//! Matrix exponential by scaling and squaring with diagonal Padé approximants.
//!
//! Degree selection follows Higham's 2005 algorithm: the smallest of the
//! orders 3, 5, 7, 9 whose backward-error threshold covers the 1-norm of the
//! input, otherwise order 13 after scaling by a power of two.

use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square};
use crate::error::{Result, SupouError};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Returns `e^{A t}`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    ensure_square(a, "expm")?;
    ensure_finite(a, "expm")?;
    if !t.is_finite() || t < 0.0 {
        return Err(SupouError::InvalidArgument(format!(
            "expm: time must be finite and nonnegative, got {t}"
        )));
    }
    Ok(expm_unchecked(&(a * t)))
}

/// Exponential of an already-scaled matrix. Inputs are assumed finite.
pub(crate) fn expm_unchecked(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    if is_diagonal(m) {
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = m[(i, i)].exp();
        }
        return out;
    }
    let norm = norm1(m);
    let ident = DMatrix::<f64>::identity(n, n);
    if norm <= THETA_9 {
        let coeffs: &[f64] = if norm <= THETA_3 {
            &B3
        } else if norm <= THETA_5 {
            &B5
        } else if norm <= THETA_7 {
            &B7
        } else {
            &B9
        };
        let (u, v) = pade_low(m, coeffs, &ident);
        return solve_pade(&u, &v);
    }

    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scaled = m * 2f64.powi(-s);
    let (u, v) = pade13(&scaled, &ident);
    let mut r = solve_pade(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_low(m: &DMatrix<f64>, b: &[f64], ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let m2 = m * m;
    let mut u_inner = ident * b[1];
    let mut v = ident * b[0];
    let mut pow = ident.clone();
    let order = b.len() - 1;
    let mut k = 2;
    while k <= order {
        pow = &pow * &m2;
        v += &pow * b[k];
        if k < order {
            u_inner += &pow * b[k + 1];
        }
        k += 2;
    }
    (m * u_inner, v)
}

fn pade13(m: &DMatrix<f64>, ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &B13;
    let m2 = m * m;
    let m4 = &m2 * &m2;
    let m6 = &m4 * &m2;
    let u_hi = &m6 * (&m6 * b[13] + &m4 * b[11] + &m2 * b[9]);
    let u = m * (u_hi + &m6 * b[7] + &m4 * b[5] + &m2 * b[3] + ident * b[1]);
    let v_hi = &m6 * (&m6 * b[12] + &m4 * b[10] + &m2 * b[8]);
    let v = v_hi + &m6 * b[6] + &m4 * b[4] + &m2 * b[2] + ident * b[0];
    (u, v)
}

fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    // q is well conditioned for the degree/norm pairs above.
    q.lu().solve(&p).expect("Padé denominator is nonsingular")
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Returns `(e^{A h}, \int_0^h e^{A u} du)` from one exponential of the
/// block matrix `[[A h, h I], [0, 0]]`. Stable for nearly singular `A`.
pub fn expm_with_integral(a: &DMatrix<f64>, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_square(a, "expm_with_integral")?;
    ensure_finite(a, "expm_with_integral")?;
    if !h.is_finite() || h < 0.0 {
        return Err(SupouError::InvalidArgument(format!(
            "expm_with_integral: step must be finite and nonnegative, got {h}"
        )));
    }
    let d = a.nrows();
    let mut block = DMatrix::zeros(2 * d, 2 * d);
    block.view_mut((0, 0), (d, d)).copy_from(&(a * h));
    for i in 0..d {
        block[(i, d + i)] = h;
    }
    let e = expm_unchecked(&block);
    Ok((
        e.view((0, 0), (d, d)).into_owned(),
        e.view((0, d), (d, d)).into_owned(),
    ))
}
