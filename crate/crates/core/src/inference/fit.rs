use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;

use super::AcovEstimate;
use crate::error::{Result, SupouError};
use crate::matfun::{spectral_abscissa, SpectralDecomposition};

const MAX_CONDITION: f64 = 1e10;
const MIN_LAGS: usize = 5;
const GRADIENT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 2000;
const ALPHA_GRID: (f64, f64) = (1.01, 5.0);
const LAMBDA_GRID: (f64, f64) = (-10.0, -0.01);
const GRID_POINTS: usize = 120;
/// Number of smallest positive lags averaged in the recovery of `B`.
const B_LAGS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Sum of squared residuals of the fitted eigenvalue curve.
    pub nls_residual: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Eigenvalues of `Γ̂_h` per positive lag, by decreasing modulus.
    pub eigencurves: Vec<Vec<Complex64>>,
    /// Index into each eigencurve list of the fitted curve.
    pub curve_used: usize,
    /// Largest imaginary part discarded when forming `B̂`.
    pub imag_residue: f64,
}

/// Moment fit of a Gamma-ray mixing `A = rB`, `r ~ Gamma(α, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRayFit {
    pub alpha_hat: f64,
    /// Fitted eigenvalue `λ` of `B` in `f(h) = (1 − λh)^{1−α}`.
    pub lambda_hat: f64,
    pub b_hat: DMatrix<f64>,
    pub diagnostics: FitDiagnostics,
}

impl GammaRayFit {
    /// A fit with given parameters and empty diagnostics.
    pub fn from_parameters(alpha_hat: f64, b_hat: DMatrix<f64>) -> Self {
        let lambda_hat = spectral_abscissa(&b_hat);
        Self { alpha_hat, lambda_hat, b_hat, diagnostics: FitDiagnostics::default() }
    }
}

/// Target data for the curve fit.
struct Curve {
    h: Vec<f64>,
    g: Vec<f64>,
}

impl Curve {
    fn in_domain(p: Vector2<f64>) -> bool {
        p[0] < 0.0 && p[1] > 1.0 && p.iter().all(|x| x.is_finite())
    }

    fn cost(&self, p: Vector2<f64>) -> f64 {
        let (lam, al) = (p[0], p[1]);
        self.h.iter().zip(&self.g).map(|(&h, &g)| ((1.0 - lam * h).powf(1.0 - al) - g).powi(2)).sum()
    }

    /// Gradient `Jᵀr` and Gauss–Newton matrix `JᵀJ`.
    fn normal_equations(&self, p: Vector2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
        let (lam, al) = (p[0], p[1]);
        let mut grad = Vector2::zeros();
        let mut gn = Matrix2::zeros();
        for (&h, &g) in self.h.iter().zip(&self.g) {
            let base = 1.0 - lam * h;
            let f = base.powf(1.0 - al);
            let j = Vector2::new((al - 1.0) * h * f / base, -base.ln() * f);
            grad += j * (f - g);
            gn += j * j.transpose();
        }
        (grad, gn)
    }

    fn grid_start(&self) -> Vector2<f64> {
        let mut best = (f64::INFINITY, Vector2::new(-1.0, 2.0));
        let (a0, a1) = ALPHA_GRID;
        let (l0, l1) = LAMBDA_GRID;
        for i in 1..=GRID_POINTS {
            let al = a0 + (a1 - a0) * i as f64 / GRID_POINTS as f64;
            for j in 0..GRID_POINTS {
                let lam = l0 * (l1 / l0).powf(j as f64 / GRID_POINTS as f64);
                let p = Vector2::new(lam, al);
                let c = self.cost(p);
                if c < best.0 {
                    best = (c, p);
                }
            }
        }
        best.1
    }

    /// Levenberg–Marquardt on `(λ, α)`, kept inside `λ < 0`, `α > 1`.
    fn refine(&self, mut p: Vector2<f64>) -> (Vector2<f64>, f64, f64, usize) {
        let mut cost = self.cost(p);
        let mut mu = 1e-3;
        let mut iterations = 0;
        let (mut grad, mut gn) = self.normal_equations(p);
        while iterations < MAX_ITERATIONS && grad.norm() >= GRADIENT_TOL {
            iterations += 1;
            let damped = gn + Matrix2::from_diagonal(&gn.diagonal()) * mu;
            let Some(step) = damped.lu().solve(&(-grad)) else {
                mu *= 4.0;
                continue;
            };
            let cand = p + step;
            let cand_cost = if Curve::in_domain(cand) { self.cost(cand) } else { f64::INFINITY };
            if cand_cost < cost {
                let tiny = step.norm() <= 1e-15 * p.norm();
                p = cand;
                cost = cand_cost;
                mu = (mu / 3.0).max(1e-15);
                (grad, gn) = self.normal_equations(p);
                if tiny {
                    break;
                }
            } else {
                mu *= 4.0;
                if mu > 1e20 {
                    break;
                }
            }
        }
        (p, cost, grad.norm(), iterations)
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let lo = sv.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

/// `Γ̂_h = acov(h) acov(0)⁻¹` at every positive lag.
fn gamma_hats(acov: &AcovEstimate) -> Result<Vec<(f64, DMatrix<f64>)>> {
    let c0 = &acov.matrices[0];
    let cond = condition_number(c0);
    if !(cond < MAX_CONDITION) {
        return Err(SupouError::Conditioning(format!("lag-0 autocovariance has condition number {cond:.3e}")));
    }
    let inv = c0.clone().try_inverse().ok_or_else(|| SupouError::Conditioning("lag-0 autocovariance is singular".into()))?;
    Ok(acov
        .lags
        .iter()
        .zip(&acov.matrices)
        .filter(|(&h, _)| h > 0.0)
        .map(|(&h, m)| (h, m * &inv))
        .collect())
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut e: Vec<Complex64> = if m.nrows() == 1 {
        vec![Complex64::new(m[(0, 0)], 0.0)]
    } else {
        m.complex_eigenvalues().iter().copied().collect()
    };
    e.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    e
}

/// `(I − Γ̂_h^{1/(1−α)}) / h`, with the imaginary residue of the power.
fn b_from_gamma(gamma: &DMatrix<f64>, h: f64, alpha: f64) -> Result<(DMatrix<f64>, f64)> {
    let dec = SpectralDecomposition::new(gamma)?;
    dec.require_diagonalizable()?;
    let scale = gamma.norm().max(f64::MIN_POSITIVE);
    if let Some(z) = dec.eigenvalues.iter().find(|z| z.re <= 0.0 && z.im.abs() <= 1e-12 * scale) {
        return Err(SupouError::Conditioning(format!("Γ̂ at lag {h} has eigenvalue {z} on the branch cut")));
    }
    let p = 1.0 / (1.0 - alpha);
    let power = dec.apply(|z| (z.ln() * p).exp());
    let residue = power.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let re = power.map(|z| z.re);
    let d = gamma.nrows();
    Ok(((DMatrix::identity(d, d) - re) / h, residue))
}

/// Fits `Γ_h = (I − Bh)^{1−α}` to an autocovariance curve.
pub fn fit_gamma_ray(acov: &AcovEstimate) -> Result<GammaRayFit> {
    fit(acov, None)
}

/// [`fit_gamma_ray`] with the curve fit started at `(λ, α)` instead of the
/// grid-search optimum.
pub fn fit_gamma_ray_from(acov: &AcovEstimate, start: (f64, f64)) -> Result<GammaRayFit> {
    let p = Vector2::new(start.0, start.1);
    if !Curve::in_domain(p) {
        return Err(SupouError::InvalidArgument(format!("start {start:?} needs λ < 0 and α > 1")));
    }
    fit(acov, Some(p))
}

fn fit(acov: &AcovEstimate, start: Option<Vector2<f64>>) -> Result<GammaRayFit> {
    let gammas = gamma_hats(acov)?;
    if gammas.len() < MIN_LAGS {
        return Err(SupouError::Data(format!("need at least {MIN_LAGS} positive lags, got {}", gammas.len())));
    }
    let eigencurves: Vec<Vec<Complex64>> = gammas.iter().map(|(_, g)| sorted_eigenvalues(g)).collect();
    let curve = Curve {
        h: gammas.iter().map(|(h, _)| *h).collect(),
        g: eigencurves.iter().map(|e| e[0].re).collect(),
    };
    let flat: f64 = curve.g.iter().map(|g| (g - 1.0).powi(2)).sum();
    let (p, cost, gradient_norm, iterations) = curve.refine(start.unwrap_or_else(|| curve.grid_start()));
    if !(cost < flat) || !Curve::in_domain(p) {
        return Err(SupouError::FitFailure(format!(
            "no decaying curve improves on the flat fit (residual {cost:.3e} vs {flat:.3e})"
        )));
    }
    let (lambda_hat, alpha_hat) = (p[0], p[1]);
    let d = acov.dim();
    let mut b_hat = DMatrix::zeros(d, d);
    let mut imag_residue = 0.0f64;
    for (h, g) in gammas.iter().take(B_LAGS) {
        let (b, r) = b_from_gamma(g, *h, alpha_hat)?;
        b_hat += b;
        imag_residue = imag_residue.max(r);
    }
    b_hat /= gammas.len().min(B_LAGS) as f64;
    let abscissa = spectral_abscissa(&b_hat);
    if !(abscissa < 0.0) {
        return Err(SupouError::FitFailure(format!("recovered B has spectral abscissa {abscissa:.3e}")));
    }
    Ok(GammaRayFit {
        alpha_hat,
        lambda_hat,
        b_hat,
        diagnostics: FitDiagnostics {
            nls_residual: cost,
            gradient_norm,
            iterations,
            eigencurves,
            curve_used: 0,
            imag_residue,
        },
    })
}
