//! Compound Poisson Lévy measures and their jump laws.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Zeta};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use super::quadrature::integrate_half_line;
use super::special::{log_zeta_tail, zeta, zeta_tail};
use super::Integral;
use crate::error::{Result, SupouError};

const PROB_TOL: f64 = 1e-12;

/// Law of the vector `v` in a rank-one jump `v vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorLaw {
    Discrete(Vec<(f64, DVector<f64>)>),
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
}

/// User-facing description of a jump law. Matrix-valued marks are stored in
/// column-stacking `vec` form and measured in the Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpKind {
    DiscreteAtoms(Vec<(f64, DVector<f64>)>),
    /// `x = n c` with probability `n^{−s}/ζ(s)`, `n ≥ 1`.
    PowerLawAtoms { direction: DVector<f64>, exponent: f64 },
    /// `x = E c` with `E` standard exponential.
    Exponential { scale: DVector<f64> },
    GaussianVector { mean: DVector<f64>, cov: DMatrix<f64> },
    RankOneWishart(VectorLaw),
}

#[derive(Debug, Clone)]
enum Repr {
    Discrete(Vec<(f64, DVector<f64>)>, Vec<f64>),
    PowerLaw { c: DVector<f64>, s: f64, zeta_s: f64, cut: usize },
    Exponential { c: DVector<f64> },
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64>, chol: DMatrix<f64>, iso: Option<f64> },
    WishartGaussian { cov: DMatrix<f64>, chol: DMatrix<f64>, iso: Option<f64> },
}

/// Jump distribution `F` of a compound Poisson process with exact moment
/// accessors where the law allows them.
#[derive(Debug, Clone)]
pub struct JumpDistribution {
    kind: JumpKind,
    mark_dim: usize,
    repr: Repr,
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

pub(crate) fn pick(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("nonempty");
    let target = u * total;
    cum.iter().position(|&c| target < c).unwrap_or(cum.len() - 1)
}

fn check_probabilities(ws: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for w in ws {
        if !(w.is_finite() && w >= 0.0) {
            return Err(SupouError::InvalidArgument(format!("{what}: probability {w} is not in [0, 1]")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(SupouError::InvalidArgument(format!("{what}: probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn psd_cholesky(cov: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n || (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
        return Err(SupouError::InvalidArgument(format!("{what}: covariance must be square and symmetric")));
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let floor = -1e-12 * eig.eigenvalues.abs().max().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < floor) {
        return Err(SupouError::InvalidArgument(format!("{what}: covariance is not positive semi-definite")));
    }
    let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sq))
}

fn isotropic_variance(mean: Option<&DVector<f64>>, cov: &DMatrix<f64>) -> Option<f64> {
    if let Some(m) = mean {
        if m.iter().any(|&x| x != 0.0) {
            return None;
        }
    }
    let s2 = cov[(0, 0)];
    let n = cov.nrows();
    let dev = (cov - DMatrix::identity(n, n) * s2).abs().max();
    (s2 > 0.0 && dev <= 1e-14 * s2).then_some(s2)
}

fn rank_one_vec(v: &DVector<f64>) -> DVector<f64> {
    let m = v * v.transpose();
    DVector::from_column_slice(m.as_slice())
}

impl JumpDistribution {
    pub fn new(kind: JumpKind) -> Result<Self> {
        let (mark_dim, repr) = match &kind {
            JumpKind::DiscreteAtoms(atoms) => {
                if atoms.is_empty() {
                    return Err(SupouError::InvalidArgument("discrete jump law needs at least one atom".into()));
                }
                check_probabilities(atoms.iter().map(|a| a.0), "discrete jump law")?;
                let m = atoms[0].1.len();
                if atoms.iter().any(|a| a.1.len() != m || a.1.iter().any(|x| !x.is_finite())) {
                    return Err(SupouError::InvalidArgument("discrete jump atoms must be finite with equal length".into()));
                }
                (m, Repr::Discrete(atoms.clone(), cumulative(atoms.iter().map(|a| a.0))))
            }
            JumpKind::PowerLawAtoms { direction, exponent } => {
                let s = *exponent;
                if !(s > 1.0 && s.is_finite()) {
                    return Err(SupouError::InvalidArgument(format!("power-law exponent must exceed 1, got {s}")));
                }
                let a = direction.norm();
                if !(a > 0.0 && a.is_finite()) || 1.0 / a > 1e6 {
                    return Err(SupouError::InvalidArgument("power-law direction norm must lie in [1e-6, inf)".into()));
                }
                let cut = (1.0 / a).floor() as usize;
                (direction.len(), Repr::PowerLaw { c: direction.clone(), s, zeta_s: zeta(s), cut })
            }
            JumpKind::Exponential { scale } => {
                let a = scale.norm();
                if !(a > 0.0 && a.is_finite()) {
                    return Err(SupouError::InvalidArgument("exponential jump scale must be nonzero and finite".into()));
                }
                (scale.len(), Repr::Exponential { c: scale.clone() })
            }
            JumpKind::GaussianVector { mean, cov } => {
                if cov.nrows() != mean.len() {
                    return Err(SupouError::InvalidArgument("Gaussian jump mean and covariance disagree in size".into()));
                }
                let chol = psd_cholesky(cov, "Gaussian jump law")?;
                let iso = isotropic_variance(Some(mean), cov);
                (mean.len(), Repr::Gaussian { mean: mean.clone(), cov: cov.clone(), chol, iso })
            }
            JumpKind::RankOneWishart(VectorLaw::Discrete(atoms)) => {
                if atoms.is_empty() {
                    return Err(SupouError::InvalidArgument("rank-one jump law needs at least one vector".into()));
                }
                check_probabilities(atoms.iter().map(|a| a.0), "rank-one jump law")?;
                let marks: Vec<(f64, DVector<f64>)> = atoms.iter().map(|(p, v)| (*p, rank_one_vec(v))).collect();
                let d = atoms[0].1.len();
                let cum = cumulative(marks.iter().map(|a| a.0));
                (d * d, Repr::Discrete(marks, cum))
            }
            JumpKind::RankOneWishart(VectorLaw::Gaussian { mean, cov }) => {
                if mean.iter().any(|&x| x != 0.0) {
                    return Err(SupouError::UnsupportedModel(
                        "rank-one Gaussian jumps must have a zero-mean vector law".into(),
                    ));
                }
                let chol = psd_cholesky(cov, "rank-one jump law")?;
                let iso = isotropic_variance(None, cov);
                let d = mean.len();
                (d * d, Repr::WishartGaussian { cov: cov.clone(), chol, iso })
            }
        };
        Ok(Self { kind, mark_dim, repr })
    }

    pub fn kind(&self) -> &JumpKind {
        &self.kind
    }

    /// Length of a mark vector (`d`, or `d²` for matrix marks).
    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match &self.repr {
            Repr::Discrete(atoms, cum) => atoms[pick(cum, rng.random::<f64>())].1.clone(),
            Repr::PowerLaw { c, s, .. } => {
                let n: f64 = Zeta::new(*s).expect("validated exponent").sample(rng);
                c * n
            }
            Repr::Exponential { c } => {
                let e: f64 = Exp1.sample(rng);
                c * e
            }
            Repr::Gaussian { mean, chol, .. } => {
                let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
                mean + chol * z
            }
            Repr::WishartGaussian { chol, .. } => {
                let z = DVector::from_fn(chol.nrows(), |_, _| StandardNormal.sample(rng));
                rank_one_vec(&(chol * z))
            }
        }
    }

    /// Whether every mark is a vectorized positive semi-definite matrix.
    pub fn is_psd_valued(&self, d: usize) -> bool {
        if self.mark_dim != d * d {
            return false;
        }
        let psd = |x: &DVector<f64>| {
            let m = DMatrix::from_column_slice(d, d, x.as_slice());
            if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1e-300) {
                return false;
            }
            let ev = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
            ev.min() >= -1e-12 * ev.abs().max().max(1e-300)
        };
        match &self.repr {
            Repr::Discrete(atoms, _) => atoms.iter().all(|a| psd(&a.1)),
            Repr::PowerLaw { c, .. } => psd(c),
            Repr::Exponential { c } => psd(c),
            Repr::Gaussian { .. } => false,
            Repr::WishartGaussian { .. } => true,
        }
    }

    /// `∫_{‖x‖≤1} x F(dx)`.
    pub fn truncated_mean(&self) -> Option<DVector<f64>> {
        match &self.repr {
            Repr::Discrete(atoms, _) => Some(weighted_sum(atoms, self.mark_dim, |x| x.norm() <= 1.0)),
            Repr::PowerLaw { c, s, zeta_s, cut } => {
                let head: f64 = (1..=*cut).map(|n| (n as f64).powf(1.0 - s)).sum();
                Some(c * (head / zeta_s))
            }
            Repr::Exponential { c } => {
                let a = c.norm();
                Some(c * (exp_truncated_first(a) / a))
            }
            Repr::Gaussian { mean, .. } => mean.iter().all(|&x| x == 0.0).then(|| DVector::zeros(self.mark_dim)),
            Repr::WishartGaussian { iso, .. } => iso.map(|s2| {
                let d = (self.mark_dim as f64).sqrt().round() as usize;
                let k = s2 * gamma_lr(d as f64 / 2.0 + 1.0, 1.0 / (2.0 * s2));
                vec_identity(d) * k
            }),
        }
    }

    /// `∫ x F(dx)`, when finite and available.
    pub fn mean(&self) -> Option<DVector<f64>> {
        match &self.repr {
            Repr::Discrete(atoms, _) => Some(weighted_sum(atoms, self.mark_dim, |_| true)),
            Repr::PowerLaw { c, s, zeta_s, .. } => (*s > 2.0).then(|| c * (zeta(s - 1.0) / zeta_s)),
            Repr::Exponential { c } => Some(c.clone()),
            Repr::Gaussian { mean, .. } => Some(mean.clone()),
            Repr::WishartGaussian { cov, .. } => Some(DVector::from_column_slice(cov.as_slice())),
        }
    }

    /// `∫_{‖x‖>1} x F(dx)`.
    pub fn tail_mean(&self) -> Option<DVector<f64>> {
        Some(self.mean()? - self.truncated_mean()?)
    }

    /// `∫ x xᵀ F(dx)`.
    pub fn second_moment(&self) -> Option<DMatrix<f64>> {
        match &self.repr {
            Repr::Discrete(atoms, _) => {
                let mut m = DMatrix::zeros(self.mark_dim, self.mark_dim);
                for (p, x) in atoms {
                    m += x * x.transpose() * *p;
                }
                Some(m)
            }
            Repr::PowerLaw { c, s, zeta_s, .. } => (*s > 3.0).then(|| c * c.transpose() * (zeta(s - 2.0) / zeta_s)),
            Repr::Exponential { c } => Some(c * c.transpose() * 2.0),
            Repr::Gaussian { mean, cov, .. } => Some(cov + mean * mean.transpose()),
            Repr::WishartGaussian { cov, .. } => {
                let d = cov.nrows();
                let mut m = DMatrix::zeros(d * d, d * d);
                for j in 0..d {
                    for i in 0..d {
                        for l in 0..d {
                            for k in 0..d {
                                m[(i + j * d, k + l * d)] =
                                    cov[(i, j)] * cov[(k, l)] + cov[(i, k)] * cov[(j, l)] + cov[(i, l)] * cov[(j, k)];
                            }
                        }
                    }
                }
                Some(m)
            }
        }
    }

    /// `∫_{‖x‖≤1} ‖x‖ F(dx)`.
    pub fn small_jump_abs(&self) -> Integral {
        match &self.repr {
            Repr::Discrete(atoms, _) => Integral::Finite(
                atoms.iter().filter(|a| a.1.norm() <= 1.0).map(|a| a.0 * a.1.norm()).sum(),
            ),
            Repr::PowerLaw { c, s, zeta_s, cut } => {
                let head: f64 = (1..=*cut).map(|n| (n as f64).powf(1.0 - s)).sum();
                Integral::Finite(c.norm() * head / zeta_s)
            }
            Repr::Exponential { c } => Integral::Finite(exp_truncated_first(c.norm())),
            Repr::Gaussian { iso: Some(s2), .. } => {
                let d = self.mark_dim as f64;
                let k = (2.0 * s2).sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp();
                Integral::Finite(k * gamma_lr((d + 1.0) / 2.0, 1.0 / (2.0 * s2)))
            }
            Repr::Gaussian { .. } => Integral::Unavailable,
            Repr::WishartGaussian { iso, cov, .. } => match iso {
                Some(s2) => {
                    let d = cov.nrows() as f64;
                    Integral::Finite(s2 * d * gamma_lr(d / 2.0 + 1.0, 1.0 / (2.0 * s2)))
                }
                None => Integral::Unavailable,
            },
        }
    }

    /// `∫_{‖x‖>1} ln‖x‖ F(dx)`.
    pub fn log_tail(&self) -> Integral {
        match &self.repr {
            Repr::Discrete(atoms, _) => Integral::Finite(
                atoms.iter().filter(|a| a.1.norm() > 1.0).map(|a| a.0 * a.1.norm().ln()).sum(),
            ),
            Repr::PowerLaw { c, s, zeta_s, cut } => {
                let a = c.norm();
                Integral::Finite((a.ln() * zeta_tail(*s, *cut) + log_zeta_tail(*s, *cut)) / zeta_s)
            }
            Repr::Exponential { c } => {
                let a = c.norm();
                integrate_half_line(|t| (1.0 + t).ln() * (-(1.0 + t) / a).exp() / a, 1e-14, 1e-11)
                    .map(Integral::Finite)
                    .unwrap_or(Integral::Unavailable)
            }
            Repr::Gaussian { iso: Some(s2), .. } => chi_log_tail(self.mark_dim as f64, *s2, 0.5),
            Repr::WishartGaussian { iso: Some(s2), cov, .. } => chi_log_tail(cov.nrows() as f64, *s2, 1.0),
            _ => Integral::Unavailable,
        }
    }

    /// `∫_{‖x‖>1} ‖x‖^r F(dx)`.
    pub fn r_moment_tail(&self, r: f64) -> Integral {
        match &self.repr {
            Repr::Discrete(atoms, _) => Integral::Finite(
                atoms.iter().filter(|a| a.1.norm() > 1.0).map(|a| a.0 * a.1.norm().powf(r)).sum(),
            ),
            Repr::PowerLaw { c, s, zeta_s, cut } => {
                if s - r > 1.0 {
                    Integral::Finite(c.norm().powf(r) * zeta_tail(s - r, *cut) / zeta_s)
                } else {
                    Integral::Infinite
                }
            }
            Repr::Exponential { c } => {
                let a = c.norm();
                Integral::Finite(a.powf(r) * (ln_gamma(r + 1.0)).exp() * gamma_ur(r + 1.0, 1.0 / a))
            }
            Repr::Gaussian { iso: Some(s2), .. } => {
                let h = self.mark_dim as f64 / 2.0;
                let q = r / 2.0;
                Integral::Finite(
                    (2.0 * s2).powf(q) * (ln_gamma(h + q) - ln_gamma(h)).exp() * gamma_ur(h + q, 1.0 / (2.0 * s2)),
                )
            }
            Repr::WishartGaussian { iso: Some(s2), cov, .. } => {
                let h = cov.nrows() as f64 / 2.0;
                Integral::Finite(
                    (2.0 * s2).powf(r) * (ln_gamma(h + r) - ln_gamma(h)).exp() * gamma_ur(h + r, 1.0 / (2.0 * s2)),
                )
            }
            _ => Integral::Unavailable,
        }
    }

    /// `∫ ‖x‖ F(dx)`, or an upper bound `(∫‖x‖²)^{1/2}` when only that is known.
    pub fn mean_norm_bound(&self) -> Integral {
        match &self.repr {
            Repr::Discrete(atoms, _) => Integral::Finite(atoms.iter().map(|a| a.0 * a.1.norm()).sum()),
            Repr::PowerLaw { c, s, zeta_s, .. } => {
                if *s > 2.0 {
                    Integral::Finite(c.norm() * zeta(s - 1.0) / zeta_s)
                } else {
                    Integral::Infinite
                }
            }
            Repr::Exponential { c } => Integral::Finite(c.norm()),
            _ => match self.second_moment() {
                Some(m) => Integral::Finite(m.trace().max(0.0).sqrt()),
                None => Integral::Unavailable,
            },
        }
    }

    /// Whether `F({‖x‖ > c}) > 0`.
    pub fn exceeds_with_positive_probability(&self, c: f64) -> bool {
        match &self.repr {
            Repr::Discrete(atoms, _) => atoms.iter().any(|a| a.0 > 0.0 && a.1.norm() > c),
            Repr::Gaussian { mean, cov, .. } => cov.abs().max() > 0.0 || mean.norm() > c,
            Repr::WishartGaussian { cov, .. } => cov.abs().max() > 0.0,
            _ => true,
        }
    }

    /// Whether `F({‖x‖ ≤ c}) > 0`.
    pub fn below_with_positive_probability(&self, c: f64) -> bool {
        match &self.repr {
            Repr::Discrete(atoms, _) => atoms.iter().any(|a| a.0 > 0.0 && a.1.norm() <= c),
            Repr::PowerLaw { c: dir, .. } => dir.norm() <= c,
            _ => true,
        }
    }

    /// `E exp(i ⟨J, w⟩)` for a possibly complex argument `w`.
    pub fn cf(&self, w: &DVector<Complex64>) -> Result<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let dot = |x: &DVector<f64>| x.iter().zip(w.iter()).map(|(a, b)| b * *a).sum::<Complex64>();
        match &self.repr {
            Repr::Discrete(atoms, _) => Ok(atoms.iter().map(|(p, x)| (i * dot(x)).exp() * *p).sum()),
            Repr::Exponential { c } => {
                let z = i * dot(c);
                if z.re >= 1.0 {
                    return Err(SupouError::NumericalPsd(
                        "exponential jump transform is infinite at this argument".into(),
                    ));
                }
                Ok(Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - z))
            }
            Repr::Gaussian { mean, cov, .. } => {
                let cw: Complex64 = (0..mean.len())
                    .flat_map(|a| (0..mean.len()).map(move |b| (a, b)))
                    .map(|(a, b)| w[a] * w[b] * cov[(a, b)])
                    .sum();
                Ok((i * dot(mean) - cw * 0.5).exp())
            }
            _ => Err(SupouError::UnsupportedModel(
                "characteristic function needs a discrete, exponential or Gaussian jump law".into(),
            )),
        }
    }
}

fn weighted_sum(atoms: &[(f64, DVector<f64>)], m: usize, keep: impl Fn(&DVector<f64>) -> bool) -> DVector<f64> {
    let mut out = DVector::zeros(m);
    for (p, x) in atoms {
        if keep(x) {
            out += x * *p;
        }
    }
    out
}

fn vec_identity(d: usize) -> DVector<f64> {
    let id = DMatrix::<f64>::identity(d, d);
    DVector::from_column_slice(id.as_slice())
}

/// `E[Z; Z ≤ 1]` for `Z` exponential with mean `a`.
fn exp_truncated_first(a: f64) -> f64 {
    a - (-1.0 / a).exp() * (1.0 + a)
}

/// `E[ln ρ; ρ > 1]` where `ρ^{1/power} = (2σ²G)^{1/2}`, `G ~ Gamma(d/2, 1)`;
/// `power = 0.5` gives the Euclidean norm of an isotropic Gaussian, `power = 1`
/// its square.
fn chi_log_tail(d: f64, s2: f64, power: f64) -> Integral {
    let h = d / 2.0;
    let c = 1.0 / (2.0 * s2);
    let ln_norm = ln_gamma(h);
    let f = |t: f64| {
        let u = c + t;
        power * (u / c).ln() * ((h - 1.0) * u.ln() - u - ln_norm).exp()
    };
    integrate_half_line(f, 1e-15, 1e-11).map(Integral::Finite).unwrap_or(Integral::Unavailable)
}

/// Compound Poisson Lévy measure `ν = rate · F`.
#[derive(Debug, Clone)]
pub struct LevyMeasureModel {
    pub rate: f64,
    pub jumps: JumpDistribution,
}

impl LevyMeasureModel {
    pub fn new(rate: f64, jumps: JumpDistribution) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(SupouError::InvalidArgument(format!("jump rate must be finite and nonnegative, got {rate}")));
        }
        Ok(Self { rate, jumps })
    }

    pub fn truncated_mean(&self) -> Option<DVector<f64>> {
        if self.rate == 0.0 {
            return Some(DVector::zeros(self.jumps.mark_dim()));
        }
        self.jumps.truncated_mean().map(|m| m * self.rate)
    }

    pub fn tail_mean(&self) -> Option<DVector<f64>> {
        if self.rate == 0.0 {
            return Some(DVector::zeros(self.jumps.mark_dim()));
        }
        self.jumps.tail_mean().map(|m| m * self.rate)
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        if self.rate == 0.0 {
            return Some(DVector::zeros(self.jumps.mark_dim()));
        }
        self.jumps.mean().map(|m| m * self.rate)
    }

    pub fn second_moment(&self) -> Option<DMatrix<f64>> {
        let m = self.jumps.mark_dim();
        if self.rate == 0.0 {
            return Some(DMatrix::zeros(m, m));
        }
        self.jumps.second_moment().map(|s| s * self.rate)
    }

    pub fn log_tail(&self) -> Integral {
        if self.rate == 0.0 {
            return Integral::Finite(0.0);
        }
        self.jumps.log_tail().scale(self.rate)
    }

    pub fn r_moment_tail(&self, r: f64) -> Integral {
        if self.rate == 0.0 {
            return Integral::Finite(0.0);
        }
        self.jumps.r_moment_tail(r).scale(self.rate)
    }

    pub fn small_jump_abs(&self) -> Integral {
        if self.rate == 0.0 {
            return Integral::Finite(0.0);
        }
        self.jumps.small_jump_abs().scale(self.rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn discrete_accessors() {
        let j = JumpDistribution::new(JumpKind::DiscreteAtoms(vec![(0.5, v(&[0.25, 0.0])), (0.5, v(&[0.0, 4.0]))]))
            .unwrap();
        assert_eq!(j.truncated_mean().unwrap(), v(&[0.125, 0.0]));
        assert_eq!(j.tail_mean().unwrap(), v(&[0.0, 2.0]));
        assert_eq!(j.log_tail(), Integral::Finite(0.5 * 4f64.ln()));
        assert_eq!(j.r_moment_tail(2.0), Integral::Finite(8.0));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let bad = JumpKind::DiscreteAtoms(vec![(0.4, v(&[1.0])), (0.5, v(&[2.0]))]);
        assert!(JumpDistribution::new(bad).is_err());
    }

    #[test]
    fn power_law_moment_boundary() {
        let j = JumpDistribution::new(JumpKind::PowerLawAtoms { direction: v(&[1.0]), exponent: 2.5 }).unwrap();
        assert!(matches!(j.r_moment_tail(2.0), Integral::Infinite));
        match j.r_moment_tail(1.0) {
            Integral::Finite(x) => assert!((x - (zeta(1.5) - 1.0) / zeta(2.5)).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponential_closed_forms() {
        let j = JumpDistribution::new(JumpKind::Exponential { scale: v(&[1.0]) }).unwrap();
        let e = (-1f64).exp();
        assert!((j.truncated_mean().unwrap()[0] - (1.0 - 2.0 * e)).abs() < 1e-15);
        assert!((j.tail_mean().unwrap()[0] - 2.0 * e).abs() < 1e-15);
        // E1(1)
        match j.log_tail() {
            Integral::Finite(x) => assert!((x - 0.21938393439552029).abs() < 1e-10),
            other => panic!("{other:?}"),
        }
        match j.r_moment_tail(2.0) {
            Integral::Finite(x) => assert!((x - 5.0 * e).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wishart_second_moment_matches_monte_carlo() {
        let j = JumpDistribution::new(JumpKind::RankOneWishart(VectorLaw::Gaussian {
            mean: DVector::zeros(2),
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
        }))
        .unwrap();
        let exact = j.second_moment().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut acc = DMatrix::zeros(4, 4);
        for _ in 0..n {
            let x = j.sample(&mut rng);
            acc += &x * x.transpose();
        }
        acc /= n as f64;
        assert!((acc - &exact).abs().max() < 0.05 * exact.abs().max());
        assert!(j.is_psd_valued(2));
    }
}
