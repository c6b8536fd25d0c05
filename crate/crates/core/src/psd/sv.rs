//! Multivariate stochastic volatility model
//! `dY = (μ + Σβ) dt + Σ^{1/2} dW + ρ(dL)` with `Σ` a PSD supOU process.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{simulate_psd_paths_with, PSDSupOUSpec, PsdPath, PsdPathBundle};
use crate::basis::quadrature::integrate_adaptive;
use crate::basis::{check_path_conditions, ConditionStatus, JumpKind, VectorLaw};
use crate::error::{Result, SupouError};
use crate::matfun::{expm, lyapunov_solve_complex, unvec, CMatrix};
use crate::par::{try_map_indexed, Execution};
use crate::process::simulate::standard_normals;
use crate::process::SimulationConfig;

/// Negative eigenvalues of `Σ_t` above this magnitude are reported instead of
/// clamped.
const CLAMP_LIMIT: f64 = 1e-8;
/// Kernel level at which the `s`-integral over `(−∞, 0]` switches to its
/// linearized tail.
const TAIL_LEVEL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SVModelSpec {
    pub mu: DVector<f64>,
    pub beta_risk: DVector<f64>,
    /// `ρ` as a `d × d(d+1)/2` array: column `j` is `ρ` applied to the `j`-th
    /// symmetric basis matrix in `vech` order (`E_ii`, or `E_ij + E_ji` below
    /// the diagonal).
    pub rho_op: DMatrix<f64>,
    pub vol: PSDSupOUSpec,
    pub y0: DVector<f64>,
}

/// Column-major lower-triangle index pairs.
fn vech_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|j| (j..d).map(move |i| (i, j))).collect()
}

impl SVModelSpec {
    pub fn new(
        mu: DVector<f64>,
        beta_risk: DVector<f64>,
        rho_op: DMatrix<f64>,
        vol: PSDSupOUSpec,
        y0: DVector<f64>,
    ) -> Result<Self> {
        let d = vol.dim();
        let bad = |m: String| Err(SupouError::InvalidArgument(m));
        if mu.len() != d || beta_risk.len() != d || y0.len() != d {
            return bad(format!("mu, beta_risk and y0 must have length {d}"));
        }
        if rho_op.nrows() != d || rho_op.ncols() != d * (d + 1) / 2 {
            return bad(format!("rho_op must be {d} x {}", d * (d + 1) / 2));
        }
        if mu.iter().chain(beta_risk.iter()).chain(y0.iter()).chain(rho_op.iter()).any(|x| !x.is_finite()) {
            return bad("model parameters must be finite".into());
        }
        Ok(Self { mu, beta_risk, rho_op, vol, y0 })
    }

    pub fn dim(&self) -> usize {
        self.vol.dim()
    }

    /// `ρ(X)` for symmetric `X`.
    pub fn rho_apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let vech = DVector::from_iterator(
            self.rho_op.ncols(),
            vech_pairs(self.dim()).into_iter().map(|(i, j)| x[(i, j)]),
        );
        &self.rho_op * vech
    }

    /// The symmetric matrix `ρ*u` with `tr((ρ*u) X) = uᵀ ρ(X)`.
    pub fn rho_adjoint(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let c = self.rho_op.transpose() * u;
        let mut out = DMatrix::zeros(d, d);
        for (n, (i, j)) in vech_pairs(d).into_iter().enumerate() {
            if i == j {
                out[(i, i)] = c[n];
            } else {
                out[(i, j)] = 0.5 * c[n];
                out[(j, i)] = 0.5 * c[n];
            }
        }
        out
    }
}

/// Simulated log prices together with the volatility paths that drive them.
#[derive(Debug, Clone)]
pub struct SvBundle {
    pub vol: PsdPathBundle,
    /// Per path, `Y` on the grid (`d × (n+1)`).
    pub y: Vec<DMatrix<f64>>,
}

/// Symmetric PSD square root, clamping small negative eigenvalues at 0.
fn psd_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.len() == 1 {
        let l = s[0];
        if l < -CLAMP_LIMIT {
            return Err(SupouError::NumericalPsd(format!("volatility has eigenvalue {l:.3e}")));
        }
        return Ok(DMatrix::from_element(1, 1, l.max(0.0).sqrt()));
    }
    let eig = SymmetricEigen::new((s + s.transpose()) * 0.5);
    if let Some(&l) = eig.eigenvalues.iter().find(|&&l| l < -CLAMP_LIMIT) {
        return Err(SupouError::NumericalPsd(format!("volatility has eigenvalue {l:.3e}")));
    }
    let r = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&r) * eig.eigenvectors.transpose())
}

/// Euler–Maruyama for `Y` along one volatility path:
/// `Y_{k+1} = Y_k + (μ + Σ_k β) dt + Σ_k^{1/2} √dt ξ_k + ρ(L_{k+1} − L_k)`.
pub fn euler_log_prices<R: Rng + ?Sized>(
    spec: &SVModelSpec,
    path: &PsdPath,
    dt: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let d = spec.dim();
    let n = path.sigma.ncols() - 1;
    let mut y = DMatrix::zeros(d, n + 1);
    y.set_column(0, &spec.y0);
    let sq = dt.sqrt();
    let pairs = vech_pairs(d);
    let mut s = DMatrix::zeros(d, d);
    let mut dl = DVector::zeros(pairs.len());
    let mut step = DVector::zeros(d);
    for k in 0..n {
        s.copy_from_slice(path.sigma.column(k).as_slice());
        let root = psd_sqrt(&s)?;
        for (m, &(i, j)) in pairs.iter().enumerate() {
            dl[m] = path.l[(i + j * d, k + 1)] - path.l[(i + j * d, k)];
        }
        let xi = standard_normals(rng, d);
        step.copy_from(&spec.mu);
        step.gemv(dt, &s, &spec.beta_risk, dt);
        step.gemv(sq, &root, &xi, 1.0);
        step.gemv(1.0, &spec.rho_op, &dl, 1.0);
        let next = y.column(k) + &step;
        y.set_column(k + 1, &next);
    }
    Ok(y)
}

/// Generator for the Brownian part of path `p`, on a stream disjoint from the
/// volatility streams.
fn brownian_rng(seed: u64, p: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1u64 << 63) | p as u64);
    rng
}

/// Simulates `(Y, Σ, L)` on the grid of `cfg`.
pub fn simulate_log_prices(spec: &SVModelSpec, cfg: &SimulationConfig) -> Result<SvBundle> {
    let report = check_path_conditions(&spec.vol.quadruple)?;
    for id in ["condbound", "exZcond", "boundZcond"] {
        if report.status(id) != Some(ConditionStatus::Holds) {
            return Err(SupouError::Precondition(format!("volatility path condition {id} does not hold")));
        }
    }
    let exec = Execution::available();
    let vol = simulate_psd_paths_with(&spec.vol, cfg, exec)?;
    let y = try_map_indexed(exec, vol.paths.len(), |p| {
        euler_log_prices(spec, &vol.paths[p], cfg.dt, &mut brownian_rng(cfg.seed, p))
    })?;
    Ok(SvBundle { vol, y })
}

/// `∫_0^b f(s) ds` for a complex integrand.
fn integrate_phi(f: impl Fn(f64) -> Result<Complex64>, b: f64) -> Result<Complex64> {
    let mut err = None;
    let v = integrate_adaptive(
        |s, out| match f(s) {
            Ok(z) => {
                out[0] = z.re;
                out[1] = z.im;
            }
            Err(e) => {
                err.get_or_insert(e);
                out.fill(0.0);
            }
        },
        0.0,
        b,
        2,
        1e-13,
        1e-10,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(Complex64::new(v[0], v[1])),
    }
}

fn frob(a: &CMatrix, b: &DMatrix<f64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * *y).sum()
}

/// `E(e^{i uᵀ Y_t} | Y₀)`.
///
/// Available for a discrete mixing measure and a discrete jump law, where the
/// cumulant `φ_Λ(W) = i tr(γ₀ W) + λ(E e^{i tr(x W)} − 1)` is a finite sum.
/// With `V = sym(β uᵀ) + (i/2) u uᵀ`, `Y = 𝐀(A)^{−*} V` and `E_τ = e^{Aτ}`:
/// on `s ∈ (0, t]` the argument is `E_{t−s}ᵀ Y E_{t−s} − Y + ρ*u`, on `s ≤ 0`
/// it is `E_{−s}ᵀ (E_tᵀ Y E_t − Y) E_{−s}`.
pub fn conditional_cf(spec: &SVModelSpec, u: &DVector<f64>, t: f64) -> Result<Complex64> {
    let d = spec.dim();
    if u.len() != d || u.iter().any(|x| !x.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("argument must be a finite vector of length {d}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    let q = &spec.vol.quadruple;
    let atoms = q
        .pi
        .discrete_atoms()
        .ok_or_else(|| SupouError::UnsupportedModel("conditional CF needs a discrete mixing measure".into()))?;
    let rate = q.levy.rate;
    if rate > 0.0
        && !matches!(
            q.levy.jumps.kind(),
            JumpKind::DiscreteAtoms(_) | JumpKind::RankOneWishart(VectorLaw::Discrete(_))
        )
    {
        return Err(SupouError::UnsupportedModel("conditional CF needs a discrete jump law".into()));
    }
    let i = Complex64::new(0.0, 1.0);
    let lead = i * (&spec.y0 + &spec.mu * t).dot(u);
    if u.iter().all(|&x| x == 0.0) {
        return Ok(lead.exp());
    }
    let gamma0 = spec.vol.gamma0_matrix()?;
    let jump_mean = match q.levy.mean() {
        Some(m) => unvec(&m, d),
        None => return Err(SupouError::UnsupportedModel("jump mean is unavailable".into())),
    };
    let bu = &spec.beta_risk * u.transpose();
    let v: CMatrix = ((&bu + bu.transpose()) * 0.5).map(|x| Complex64::new(x, 0.0))
        + (u * u.transpose()).map(|x| Complex64::new(0.0, 0.5 * x));
    let r = spec.rho_adjoint(u).map(|x| Complex64::new(x, 0.0));
    let phi = |w: &CMatrix| -> Result<Complex64> {
        let mut out = i * frob(w, &gamma0);
        if rate > 0.0 {
            let wv = DVector::from_column_slice(w.as_slice());
            out += (q.levy.jumps.cf(&wv)? - 1.0) * rate;
        }
        Ok(out)
    };
    let sandwich = |e: &DMatrix<f64>, m: &CMatrix| -> CMatrix {
        let ec = e.map(|x| Complex64::new(x, 0.0));
        ec.transpose() * m * ec
    };
    let mut total = lead;
    for atom in &atoms {
        let a = &atom.a;
        let at = a.transpose();
        let y = lyapunov_solve_complex(&at, &v)?;
        let recent = integrate_phi(|s| Ok(phi(&(sandwich(&expm(a, t - s)?, &y) - &y + &r))?), t)?;
        let e_t = expm(a, t)?;
        let dmat = sandwich(&e_t, &y) - &y;
        let dnorm = dmat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let k2 = atom.bound.kappa * atom.bound.kappa;
        let cut = if dnorm > 0.0 { ((k2 * dnorm / TAIL_LEVEL).ln() / (2.0 * atom.bound.rho)).max(0.0) } else { 0.0 };
        let past = if cut > 0.0 {
            integrate_phi(|sig| phi(&sandwich(&expm(a, sig)?, &dmat)), cut)?
        } else {
            Complex64::new(0.0, 0.0)
        };
        // Beyond the cut φ is linear to within O(‖W‖²):
        // ∫_cut^∞ E_σᵀ D E_σ dσ = −𝐀(A)^{−*}(E_cutᵀ D E_cut).
        let e_cut = expm(a, cut)?;
        let tail_w = -lyapunov_solve_complex(&at, &sandwich(&e_cut, &dmat))?;
        let tail = i * (frob(&tail_w, &gamma0) + frob(&tail_w, &jump_mean));
        total += (recent + past + tail) * atom.weight;
    }
    if !total.is_finite() {
        return Err(SupouError::Conditioning("conditional CF exponent is not finite".into()));
    }
    Ok(total.exp())
}
