//! Mixing measures `π` on stable matrices and expectations against them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Zeta};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use super::levy::pick;
use super::quadrature::{
    integrate_half_line, laguerre_rule, sum_series, sum_series_scalar, SeriesSum, MAX_LAGUERRE_NODES,
    MIN_LAGUERRE_NODES,
};
use super::special::zeta;
use super::Integral;
use crate::error::{Result, SupouError};
use crate::matfun::{decay_bounds_auto, ensure_finite, ensure_square, ensure_stable, op_norm, DecayBound};
use crate::par::{try_map_indexed, Execution};

const WEIGHT_TOL: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 1 << 20;
const DIAGONAL_NODE_CAP: usize = 1 << 18;

/// A Gamma-distributed ray `A = r B`, `r ~ Gamma(α, rate β)`.
#[derive(Debug, Clone)]
pub struct Ray {
    pub b: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Decay constants of `B`; those of `rB` are `(κ, rρ, ϑ, rτ)`.
    pub bound: DecayBound,
    pub norm_b: f64,
}

impl Ray {
    pub fn new(b: DMatrix<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SupouError::InvalidArgument(format!("Gamma shape must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(SupouError::InvalidArgument(format!("Gamma rate must be positive, got {beta}")));
        }
        ensure_square(&b, "ray direction")?;
        ensure_finite(&b, "ray direction")?;
        ensure_stable(&b)?;
        let bound = decay_bounds_auto(&b)?;
        let norm_b = op_norm(&b);
        Ok(Self { b, alpha, beta, bound, norm_b })
    }

    /// `E[1/r]`, infinite for `α ≤ 1`.
    pub fn mean_inverse_scale(&self) -> f64 {
        if self.alpha > 1.0 {
            self.beta / (self.alpha - 1.0)
        } else {
            f64::INFINITY
        }
    }
}

/// Independent Gamma law of one diagonal entry `−r_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMarginal {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixAtom {
    pub weight: f64,
    pub a: DMatrix<f64>,
    pub bound: DecayBound,
}

#[derive(Debug, Clone)]
pub struct WeightedRay {
    pub weight: f64,
    pub ray: Ray,
}

/// Countable polar family: weights `n^{−p}/ζ(p)`, directions
/// `v_n = diag(base + slope/n)`, radial laws `Gamma(α, β₀ n^{−q})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSeries {
    pub weight_exponent: f64,
    pub alpha: f64,
    pub beta0: f64,
    pub beta_exponent: f64,
    pub base: DVector<f64>,
    pub slope: DVector<f64>,
}

#[derive(Debug, Clone)]
pub enum PolarLaw {
    Atoms(Vec<WeightedRay>),
    Series(PolarSeries),
}

/// Law of the eigenvector matrix `S`.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorLaw {
    Atoms(Vec<(f64, DMatrix<f64>)>),
    /// `S_n = base + n · slope` with probability `n^{−p}/ζ(p)`.
    Series { base: DMatrix<f64>, slope: DMatrix<f64>, exponent: f64 },
}

/// `A = S D S⁻¹` with independent `S` and diagonal `D`.
#[derive(Debug, Clone)]
pub struct EigenFactorLaw {
    pub s_law: FactorLaw,
    pub d_law: Vec<(f64, DVector<f64>)>,
}

#[derive(Debug, Clone)]
pub enum MixingMeasure {
    DiscreteAtoms(Vec<MatrixAtom>),
    GammaRay(Ray),
    MultiGammaRay(Vec<WeightedRay>),
    DiagonalGamma(Vec<GammaMarginal>),
    PolarNegDef(PolarLaw),
    EigenFactor(EigenFactorLaw),
}

/// One draw from `π` together with its decay constants.
#[derive(Debug, Clone)]
pub struct SampledMatrix {
    pub a: DMatrix<f64>,
    pub kappa: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Component {
    Point { a: DMatrix<f64>, bound: DecayBound, norm: f64 },
    Ray(Ray),
    Diagonal(Vec<GammaMarginal>),
}

type TermFn<'a> = Box<dyn Fn(usize) -> Result<Vec<(f64, Component)>> + Sync + 'a>;

pub(crate) enum Components<'a> {
    Finite(Vec<(f64, Component)>),
    Series(TermFn<'a>),
}

fn check_weights(ws: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for w in ws {
        if !(w.is_finite() && w >= 0.0) {
            return Err(SupouError::InvalidArgument(format!("{what}: weight {w} is not in [0, 1]")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(SupouError::InvalidArgument(format!("{what}: weights sum to {sum}, not 1")));
    }
    Ok(())
}

impl MatrixAtom {
    pub fn new(weight: f64, a: DMatrix<f64>) -> Result<Self> {
        ensure_square(&a, "mixing atom")?;
        ensure_finite(&a, "mixing atom")?;
        let bound = decay_bounds_auto(&a)?;
        Ok(Self { weight, a, bound })
    }
}

fn check_unit_negdef(v: &DMatrix<f64>) -> Result<()> {
    if (v - v.transpose()).abs().max() > 1e-12 * v.abs().max().max(1.0) {
        return Err(SupouError::InvalidArgument("polar direction must be symmetric".into()));
    }
    let ev = nalgebra::SymmetricEigen::new(v.clone()).eigenvalues;
    if ev.max() >= 0.0 {
        return Err(SupouError::InvalidArgument("polar direction must be negative definite".into()));
    }
    if (ev.abs().max() - 1.0).abs() > 1e-9 {
        return Err(SupouError::InvalidArgument("polar direction must have unit operator norm".into()));
    }
    Ok(())
}

impl PolarSeries {
    fn direction(&self, n: usize) -> DMatrix<f64> {
        let nf = n as f64;
        DMatrix::from_diagonal(&self.base.zip_map(&self.slope, |b, s| b + s / nf))
    }

    fn beta(&self, n: usize) -> f64 {
        self.beta0 * (n as f64).powf(-self.beta_exponent)
    }

    fn weight(&self, n: usize, zeta_p: f64) -> f64 {
        (n as f64).powf(-self.weight_exponent) / zeta_p
    }
}

impl FactorLaw {
    fn factor(base: &DMatrix<f64>, slope: &DMatrix<f64>, n: f64) -> DMatrix<f64> {
        base + slope * n
    }
}

fn factor_condition(s: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| SupouError::InvalidArgument("eigenvector factor is singular".into()))?;
    let kappa = op_norm(s) * op_norm(&inv);
    if !kappa.is_finite() || kappa > 1e12 {
        return Err(SupouError::Conditioning(format!("eigenvector factor condition number {kappa:e}")));
    }
    Ok((inv, kappa))
}

fn eigen_point(s: &DMatrix<f64>, dvec: &DVector<f64>) -> Result<Component> {
    let (inv, kappa) = factor_condition(s)?;
    let a = s * DMatrix::from_diagonal(dvec) * &inv;
    let rho = -dvec.max();
    let tau = -dvec.min();
    let norm = op_norm(&a);
    Ok(Component::Point { a, bound: DecayBound { kappa, rho, theta: 1.0 / kappa, tau }, norm })
}

impl MixingMeasure {
    /// Validates the measure; constructors of the individual pieces check the rest.
    pub fn validate(&self) -> Result<()> {
        match self {
            MixingMeasure::DiscreteAtoms(atoms) => {
                if atoms.is_empty() {
                    return Err(SupouError::InvalidArgument("mixing measure needs at least one atom".into()));
                }
                check_weights(atoms.iter().map(|a| a.weight), "mixing atoms")?;
                let d = atoms[0].a.nrows();
                if atoms.iter().any(|a| a.a.nrows() != d) {
                    return Err(SupouError::InvalidArgument("mixing atoms differ in dimension".into()));
                }
            }
            MixingMeasure::GammaRay(_) => {}
            MixingMeasure::MultiGammaRay(rays) | MixingMeasure::PolarNegDef(PolarLaw::Atoms(rays)) => {
                if rays.is_empty() {
                    return Err(SupouError::InvalidArgument("mixing measure needs at least one ray".into()));
                }
                check_weights(rays.iter().map(|r| r.weight), "mixing rays")?;
                let d = rays[0].ray.b.nrows();
                if rays.iter().any(|r| r.ray.b.nrows() != d) {
                    return Err(SupouError::InvalidArgument("mixing rays differ in dimension".into()));
                }
                if matches!(self, MixingMeasure::PolarNegDef(_)) {
                    for r in rays {
                        check_unit_negdef(&r.ray.b)?;
                    }
                }
            }
            MixingMeasure::DiagonalGamma(m) => {
                if m.is_empty() {
                    return Err(SupouError::InvalidArgument("diagonal Gamma law needs a dimension".into()));
                }
                for g in m {
                    if !(g.alpha > 0.0 && g.beta > 0.0 && g.alpha.is_finite() && g.beta.is_finite()) {
                        return Err(SupouError::InvalidArgument("diagonal Gamma parameters must be positive".into()));
                    }
                }
            }
            MixingMeasure::PolarNegDef(PolarLaw::Series(s)) => {
                if !(s.weight_exponent > 1.0) {
                    return Err(SupouError::InvalidArgument("polar weight exponent must exceed 1".into()));
                }
                if !(s.alpha > 0.0 && s.beta0 > 0.0 && s.beta_exponent.is_finite()) {
                    return Err(SupouError::InvalidArgument("polar radial parameters must be positive".into()));
                }
                if s.base.len() != s.slope.len() || s.base.is_empty() {
                    return Err(SupouError::InvalidArgument("polar base and slope differ in length".into()));
                }
                for n in [1usize, 2, 10, 1000, 1 << 30] {
                    check_unit_negdef(&s.direction(n))?;
                }
            }
            MixingMeasure::EigenFactor(law) => {
                if law.d_law.is_empty() {
                    return Err(SupouError::InvalidArgument("eigenvalue law needs at least one atom".into()));
                }
                check_weights(law.d_law.iter().map(|a| a.0), "eigenvalue law")?;
                let d = law.d_law[0].1.len();
                for (_, dv) in &law.d_law {
                    if dv.len() != d || dv.iter().any(|&x| !(x < 0.0 && x.is_finite())) {
                        return Err(SupouError::InvalidArgument("eigenvalues must be finite and negative".into()));
                    }
                    if dv.as_slice().windows(2).any(|w| w[0] >= w[1]) {
                        return Err(SupouError::InvalidArgument(
                            "eigenvalues must be strictly increasing along the diagonal".into(),
                        ));
                    }
                }
                let check_s = |s: &DMatrix<f64>| -> Result<()> {
                    if s.nrows() != d || s.ncols() != d {
                        return Err(SupouError::InvalidArgument("eigenvector factor has the wrong size".into()));
                    }
                    for col in s.column_iter() {
                        let first = col.iter().find(|x| **x != 0.0).copied().unwrap_or(0.0);
                        if first != 1.0 {
                            return Err(SupouError::InvalidArgument(
                                "eigenvector columns must have first nonzero entry 1".into(),
                            ));
                        }
                    }
                    factor_condition(s).map(|_| ())
                };
                match &law.s_law {
                    FactorLaw::Atoms(atoms) => {
                        if atoms.is_empty() {
                            return Err(SupouError::InvalidArgument("eigenvector law needs at least one atom".into()));
                        }
                        check_weights(atoms.iter().map(|a| a.0), "eigenvector law")?;
                        for (_, s) in atoms {
                            check_s(s)?;
                        }
                    }
                    FactorLaw::Series { base, slope, exponent } => {
                        if !(*exponent > 1.0) {
                            return Err(SupouError::InvalidArgument("eigenvector series exponent must exceed 1".into()));
                        }
                        for n in [1.0, 2.0, 7.0] {
                            check_s(&FactorLaw::factor(base, slope, n))?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            MixingMeasure::DiscreteAtoms(a) => a[0].a.nrows(),
            MixingMeasure::GammaRay(r) => r.b.nrows(),
            MixingMeasure::MultiGammaRay(r) | MixingMeasure::PolarNegDef(PolarLaw::Atoms(r)) => r[0].ray.b.nrows(),
            MixingMeasure::DiagonalGamma(m) => m.len(),
            MixingMeasure::PolarNegDef(PolarLaw::Series(s)) => s.base.len(),
            MixingMeasure::EigenFactor(l) => l.d_law[0].1.len(),
        }
    }

    /// Finitely many point masses `(weight, A, bound)`, if `π` is of that form.
    pub fn discrete_atoms(&self) -> Option<Vec<MatrixAtom>> {
        match self.components().ok()? {
            Components::Finite(list) => list
                .into_iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, c)| match c {
                    Component::Point { a, bound, .. } => Some(MatrixAtom { weight: w, a, bound }),
                    _ => None,
                })
                .collect(),
            Components::Series(_) => None,
        }
    }

    pub(crate) fn components(&self) -> Result<Components<'_>> {
        Ok(match self {
            MixingMeasure::DiscreteAtoms(atoms) => Components::Finite(
                atoms
                    .iter()
                    .map(|m| (m.weight, Component::Point { a: m.a.clone(), bound: m.bound, norm: op_norm(&m.a) }))
                    .collect(),
            ),
            MixingMeasure::GammaRay(r) => Components::Finite(vec![(1.0, Component::Ray(r.clone()))]),
            MixingMeasure::MultiGammaRay(rays) | MixingMeasure::PolarNegDef(PolarLaw::Atoms(rays)) => {
                Components::Finite(rays.iter().map(|r| (r.weight, Component::Ray(r.ray.clone()))).collect())
            }
            MixingMeasure::DiagonalGamma(m) => Components::Finite(vec![(1.0, Component::Diagonal(m.clone()))]),
            MixingMeasure::PolarNegDef(PolarLaw::Series(s)) => {
                let zeta_p = zeta(s.weight_exponent);
                Components::Series(Box::new(move |n| {
                    let ray = Ray::new(s.direction(n), s.alpha, s.beta(n))?;
                    Ok(vec![(s.weight(n, zeta_p), Component::Ray(ray))])
                }))
            }
            MixingMeasure::EigenFactor(law) => match &law.s_law {
                FactorLaw::Atoms(atoms) => {
                    let mut out = Vec::new();
                    for (ps, s) in atoms {
                        for (pd, dv) in &law.d_law {
                            out.push((ps * pd, eigen_point(s, dv)?));
                        }
                    }
                    Components::Finite(out)
                }
                FactorLaw::Series { base, slope, exponent } => {
                    let zeta_p = zeta(*exponent);
                    let p = *exponent;
                    Components::Series(Box::new(move |n| {
                        let nf = n as f64;
                        let s = FactorLaw::factor(base, slope, nf);
                        let ps = nf.powf(-p) / zeta_p;
                        law.d_law.iter().map(|(pd, dv)| Ok((ps * pd, eigen_point(&s, dv)?))).collect()
                    }))
                }
            },
        })
    }

    /// Draws `A ~ π` with its decay constants `(κ, ρ)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledMatrix {
        fn ray_draw<R: Rng + ?Sized>(ray: &Ray, rng: &mut R) -> SampledMatrix {
            let r: f64 = Gamma::new(ray.alpha, 1.0 / ray.beta).expect("validated").sample(rng);
            // A zero draw is possible in floating point for tiny shapes.
            let r = r.max(f64::MIN_POSITIVE);
            SampledMatrix { a: &ray.b * r, kappa: ray.bound.kappa, rho: r * ray.bound.rho }
        }
        fn pick_weighted<R: Rng + ?Sized>(ws: impl Iterator<Item = f64>, rng: &mut R) -> usize {
            let mut acc = 0.0;
            let cum: Vec<f64> = ws
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect();
            pick(&cum, rng.random::<f64>())
        }
        match self {
            MixingMeasure::DiscreteAtoms(atoms) => {
                let m = &atoms[pick_weighted(atoms.iter().map(|a| a.weight), rng)];
                SampledMatrix { a: m.a.clone(), kappa: m.bound.kappa, rho: m.bound.rho }
            }
            MixingMeasure::GammaRay(r) => ray_draw(r, rng),
            MixingMeasure::MultiGammaRay(rays) | MixingMeasure::PolarNegDef(PolarLaw::Atoms(rays)) => {
                let k = pick_weighted(rays.iter().map(|r| r.weight), rng);
                ray_draw(&rays[k].ray, rng)
            }
            MixingMeasure::DiagonalGamma(m) => {
                let r: Vec<f64> = m
                    .iter()
                    .map(|g| {
                        let x: f64 = Gamma::new(g.alpha, 1.0 / g.beta).expect("validated").sample(rng);
                        x.max(f64::MIN_POSITIVE)
                    })
                    .collect();
                let rho = r.iter().copied().fold(f64::INFINITY, f64::min);
                SampledMatrix { a: -DMatrix::from_diagonal(&DVector::from_vec(r)), kappa: 1.0, rho }
            }
            MixingMeasure::PolarNegDef(PolarLaw::Series(s)) => {
                let n: f64 = Zeta::new(s.weight_exponent).expect("validated").sample(rng);
                let n = n.min(1e15) as usize;
                let v = s.direction(n);
                let rho_v = -v.diagonal().max();
                let r: f64 = Gamma::new(s.alpha, 1.0 / s.beta(n)).expect("validated").sample(rng);
                let r = r.max(f64::MIN_POSITIVE);
                SampledMatrix { a: v * r, kappa: 1.0, rho: r * rho_v }
            }
            MixingMeasure::EigenFactor(law) => {
                let s = match &law.s_law {
                    FactorLaw::Atoms(atoms) => atoms[pick_weighted(atoms.iter().map(|a| a.0), rng)].1.clone(),
                    FactorLaw::Series { base, slope, exponent } => {
                        let n: f64 = Zeta::new(*exponent).expect("validated").sample(rng);
                        FactorLaw::factor(base, slope, n.min(1e15))
                    }
                };
                let dv = &law.d_law[pick_weighted(law.d_law.iter().map(|a| a.0), rng)].1;
                match eigen_point(&s, dv) {
                    Ok(Component::Point { a, bound, .. }) => SampledMatrix { a, kappa: bound.kappa, rho: bound.rho },
                    _ => {
                        // Ill-conditioned factors far out in the series; fall back to D itself.
                        SampledMatrix { a: DMatrix::from_diagonal(dv), kappa: 1.0, rho: -dv.max() }
                    }
                }
            }
        }
    }

    /// Whether `π(ϑ ≥ ε) > 0`.
    pub fn theta_mass_at_least(&self, eps: f64) -> Result<bool> {
        let comp_ok = |c: &Component| match c {
            Component::Point { bound, .. } => bound.theta >= eps,
            Component::Ray(r) => r.bound.theta >= eps,
            Component::Diagonal(_) => 1.0 >= eps,
        };
        Ok(match self.components()? {
            Components::Finite(list) => list.iter().any(|(w, c)| *w > 0.0 && comp_ok(c)),
            Components::Series(f) => {
                let mut found = false;
                for n in 1..=64 {
                    if f(n)?.iter().any(|(w, c)| *w > 0.0 && comp_ok(c)) {
                        found = true;
                        break;
                    }
                }
                found
            }
        })
    }

    /// `E_π[f(κ, ρ, ϑ, τ, ‖A‖)]` for the functionals the condition checkers need.
    pub fn decay_functional(&self, f: DecayFunctional) -> Result<Integral> {
        match self.components()? {
            Components::Finite(list) => {
                let mut total = Integral::Finite(0.0);
                for (w, c) in &list {
                    if *w > 0.0 {
                        total = total.add(component_functional(c, f)?.scale(*w));
                    }
                }
                Ok(total)
            }
            Components::Series(term) => {
                let mut status = Integral::Finite(0.0);
                let sum = sum_series_scalar(
                    |n| {
                        let mut s = 0.0;
                        for (w, c) in term(n)? {
                            if w > 0.0 {
                                match component_functional(&c, f)?.scale(w) {
                                    Integral::Finite(v) => s += v,
                                    Integral::Bounded(v) => {
                                        s += v;
                                        status = status.add(Integral::Bounded(0.0));
                                    }
                                    other => {
                                        status = status.add(other);
                                    }
                                }
                            }
                        }
                        Ok(s)
                    },
                    1e-9,
                    SERIES_MAX_TERMS,
                )?;
                Ok(match (status, sum) {
                    (Integral::Infinite, _) => Integral::Infinite,
                    (Integral::Unavailable, _) => Integral::Unavailable,
                    (_, SeriesSum::Diverged { .. }) => Integral::Infinite,
                    (_, SeriesSum::Undecidable { .. }) => Integral::Unavailable,
                    (Integral::Bounded(_), SeriesSum::Converged { value, .. }) => Integral::Bounded(value),
                    (_, SeriesSum::Converged { value, .. }) => Integral::Finite(value),
                })
            }
        }
    }
}

/// Scalar functionals of the decay constants of `A ~ π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFunctional {
    /// `κ^p / ρ`
    KappaPowOverRho(f64),
    /// `1{ϑ ≥ ε} / τ`
    IndicatorOverTau(f64),
    /// `ϑ² / τ`
    ThetaSqOverTau,
    /// `κ^p`
    KappaPow(f64),
    /// `‖A‖ κ^p`
    NormKappaPow(f64),
    /// `(‖A‖ ∨ 1) κ^p / ρ`
    NormOrOneKappaPowOverRho(f64),
    /// `κ^p e^{−q ρ T} / ρ`
    DecayedKappaPowOverRho { p: f64, q: f64, t: f64 },
}

fn finite_or_inf(x: f64) -> Integral {
    if x.is_finite() {
        Integral::Finite(x)
    } else {
        Integral::Infinite
    }
}

fn component_functional(c: &Component, f: DecayFunctional) -> Result<Integral> {
    use DecayFunctional::*;
    Ok(match c {
        Component::Point { bound, norm, .. } => {
            let DecayBound { kappa, rho, theta, tau } = *bound;
            Integral::Finite(match f {
                KappaPowOverRho(p) => kappa.powf(p) / rho,
                IndicatorOverTau(eps) => {
                    if theta >= eps {
                        1.0 / tau
                    } else {
                        0.0
                    }
                }
                ThetaSqOverTau => theta * theta / tau,
                KappaPow(p) => kappa.powf(p),
                NormKappaPow(p) => norm * kappa.powf(p),
                NormOrOneKappaPowOverRho(p) => norm.max(1.0) * kappa.powf(p) / rho,
                DecayedKappaPowOverRho { p, q, t } => kappa.powf(p) * (-q * rho * t).exp() / rho,
            })
        }
        Component::Ray(ray) => {
            let DecayBound { kappa, rho, theta, tau } = ray.bound;
            let (al, be) = (ray.alpha, ray.beta);
            let inv = ray.mean_inverse_scale();
            match f {
                KappaPowOverRho(p) => finite_or_inf(kappa.powf(p) * inv / rho),
                IndicatorOverTau(eps) => {
                    if theta >= eps {
                        finite_or_inf(inv / tau)
                    } else {
                        Integral::Finite(0.0)
                    }
                }
                ThetaSqOverTau => finite_or_inf(theta * theta * inv / tau),
                KappaPow(p) => Integral::Finite(kappa.powf(p)),
                NormKappaPow(p) => Integral::Finite(kappa.powf(p) * ray.norm_b * al / be),
                NormOrOneKappaPowOverRho(p) => {
                    if al <= 1.0 {
                        Integral::Infinite
                    } else {
                        // E[max(r‖B‖, 1)/r] split at r = 1/‖B‖.
                        let x = be / ray.norm_b;
                        let e = ray.norm_b * gamma_ur(al, x) + be / (al - 1.0) * gamma_lr(al - 1.0, x);
                        Integral::Finite(kappa.powf(p) * e / rho)
                    }
                }
                DecayedKappaPowOverRho { p, q, t } => {
                    if al <= 1.0 {
                        Integral::Infinite
                    } else {
                        let e = (al * be.ln() + (1.0 - al) * (be + q * rho * t).ln()).exp() / (al - 1.0);
                        Integral::Finite(kappa.powf(p) * e / rho)
                    }
                }
            }
        }
        Component::Diagonal(m) => diagonal_functional(m, f)?,
    })
}

fn diagonal_functional(m: &[GammaMarginal], f: DecayFunctional) -> Result<Integral> {
    use DecayFunctional::*;
    let all_above_one = m.iter().all(|g| g.alpha > 1.0);
    let sum_alpha: f64 = m.iter().map(|g| g.alpha).sum();
    let surv = |u: f64| m.iter().map(|g| gamma_ur(g.alpha, g.beta * u)).product::<f64>();
    let cdf = |u: f64| m.iter().map(|g| gamma_lr(g.alpha, g.beta * u)).product::<f64>();
    let inv_min = || -> Integral {
        if !all_above_one {
            return Integral::Infinite;
        }
        match integrate_half_line(|u| if u > 0.0 { (1.0 - surv(u)) / (u * u) } else { 0.0 }, 1e-13, 1e-10) {
            Ok(v) => Integral::Finite(v),
            Err(_) => Integral::Bounded(m.iter().map(|g| g.beta / (g.alpha - 1.0)).sum()),
        }
    };
    let inv_max = || -> Integral {
        if sum_alpha <= 1.0 {
            return Integral::Infinite;
        }
        match integrate_half_line(|u| if u > 0.0 { cdf(u) / (u * u) } else { 0.0 }, 1e-13, 1e-10) {
            Ok(v) => Integral::Finite(v),
            Err(_) => Integral::Unavailable,
        }
    };
    Ok(match f {
        KappaPowOverRho(_) => inv_min(),
        IndicatorOverTau(eps) => {
            if eps <= 1.0 {
                inv_max()
            } else {
                Integral::Finite(0.0)
            }
        }
        ThetaSqOverTau => inv_max(),
        KappaPow(_) => Integral::Finite(1.0),
        NormKappaPow(_) => match integrate_half_line(|u| 1.0 - cdf(u), 1e-13, 1e-10) {
            Ok(v) => Integral::Finite(v),
            Err(_) => Integral::Bounded(m.iter().map(|g| g.alpha / g.beta).sum()),
        },
        NormOrOneKappaPowOverRho(_) => {
            if !all_above_one {
                return Ok(Integral::Infinite);
            }
            // max(‖A‖, 1)/min r ≤ Σ_i (1 + Σ_j r_j)/r_i
            let means: Vec<f64> = m.iter().map(|g| g.alpha / g.beta).collect();
            let total_mean: f64 = means.iter().sum();
            let b = m
                .iter()
                .zip(&means)
                .map(|(g, mu)| g.beta / (g.alpha - 1.0) * (1.0 + total_mean - mu) + 1.0)
                .sum();
            Integral::Bounded(b)
        }
        DecayedKappaPowOverRho { q, t, .. } => {
            if !all_above_one {
                return Ok(Integral::Infinite);
            }
            let b = m
                .iter()
                .map(|g| {
                    (g.alpha * g.beta.ln() + (1.0 - g.alpha) * (g.beta + q * t).ln()).exp() / (g.alpha - 1.0)
                })
                .sum();
            Integral::Bounded(b)
        }
    })
}

/// Integrand for [`pi_expectation_tilted`]: receives `A` and the tilt `s`, and
/// must return `e^{s} G(A)`.
pub trait TiltedIntegrand: Fn(&DMatrix<f64>, f64) -> Result<DMatrix<f64>> + Sync {}
impl<F: Fn(&DMatrix<f64>, f64) -> Result<DMatrix<f64>> + Sync> TiltedIntegrand for F {}

/// `E_π[G(A)]` to relative tolerance `tol`.
pub fn pi_expectation(
    pi: &MixingMeasure,
    g: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>> + Sync,
    tol: f64,
) -> Result<DMatrix<f64>> {
    pi_expectation_tilted(pi, 0.0, |a: &DMatrix<f64>, _s: f64| g(a), tol)
}

/// `E_π[G(A)]` where the integrand is supplied as `(A, s) ↦ e^{s} G(A)`.
///
/// On Gamma rays the tilt is `s = h ρ(A)`, which moves the Laguerre weight
/// onto the decay of `e^{Ah}` so that large lags stay accurate. Other
/// components are evaluated with `s = 0`.
pub fn pi_expectation_tilted(pi: &MixingMeasure, h: f64, g: impl TiltedIntegrand, tol: f64) -> Result<DMatrix<f64>> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(SupouError::InvalidArgument(format!("tilt lag must be finite and nonnegative, got {h}")));
    }
    match pi.components()? {
        Components::Finite(list) => {
            let mut acc: Option<DMatrix<f64>> = None;
            for (w, c) in &list {
                if *w == 0.0 {
                    continue;
                }
                let v = component_expectation(c, h, &g, tol)? * *w;
                acc = Some(match acc {
                    Some(a) => a + v,
                    None => v,
                });
            }
            acc.ok_or_else(|| SupouError::InvalidArgument("mixing measure has no mass".into()))
        }
        Components::Series(term) => {
            let first = term(1)?;
            let probe = component_expectation(&first[0].1, h, &g, tol)?;
            let zero = DMatrix::zeros(probe.nrows(), probe.ncols());
            let sum = sum_series(
                |n| {
                    let mut acc = zero.clone();
                    for (w, c) in term(n)? {
                        if w > 0.0 {
                            acc += component_expectation(&c, h, &g, tol)? * w;
                        }
                    }
                    Ok(acc)
                },
                zero.clone(),
                |a, b| a + b,
                |a, s| a * s,
                |a| a.abs().max(),
                tol,
                SERIES_MAX_TERMS,
            )?;
            match sum {
                SeriesSum::Converged { value, .. } => Ok(value),
                SeriesSum::Diverged { terms, .. } => {
                    Err(SupouError::Moment(format!("expectation over the mixing series diverges ({terms} terms)")))
                }
                SeriesSum::Undecidable { terms, .. } => Err(SupouError::Quadrature(format!(
                    "expectation over the mixing series did not settle within {terms} terms"
                ))),
            }
        }
    }
}

fn component_expectation(c: &Component, h: f64, g: &impl TiltedIntegrand, tol: f64) -> Result<DMatrix<f64>> {
    match c {
        Component::Point { a, .. } => g(a, 0.0),
        Component::Ray(ray) => ray_expectation(ray, h, g, tol),
        Component::Diagonal(m) => diagonal_expectation(m, g, tol),
    }
}

fn converged(prev: &DMatrix<f64>, next: &DMatrix<f64>, tol: f64) -> bool {
    let scale = next.abs().max();
    (next - prev).abs().max() <= tol * scale || scale == 0.0
}

fn ray_expectation(ray: &Ray, h: f64, g: &impl TiltedIntegrand, tol: f64) -> Result<DMatrix<f64>> {
    let (al, be) = (ray.alpha, ray.beta);
    let c = h * ray.bound.rho;
    let lambda = be + c;
    // Weight x^{α−2}e^{−x} times x absorbs a 1/r singularity of the integrand.
    let (a, extra) = if al > 1.0 { (al - 2.0, true) } else { (al - 1.0, false) };
    let pref = (al * (be / lambda).ln() - ln_gamma(al)).exp();
    let rule_sum = |n: usize| -> Result<DMatrix<f64>> {
        let rule = laguerre_rule(n, a);
        let terms = try_map_indexed(Execution::available(), n, |k| {
            let y = rule.nodes[k];
            let r = y / lambda;
            let v = g(&(&ray.b * r), c * r)?;
            Ok::<_, SupouError>(v * (rule.weights[k] * if extra { y } else { 1.0 }))
        })?;
        let mut it = terms.into_iter();
        let first = it.next().expect("nonempty rule");
        Ok(it.fold(first, |acc, t| acc + t) * pref)
    };
    let mut n = MIN_LAGUERRE_NODES;
    let mut prev = rule_sum(n)?;
    while n < MAX_LAGUERRE_NODES {
        n *= 2;
        let next = rule_sum(n)?;
        if converged(&prev, &next, tol) {
            return Ok(next);
        }
        prev = next;
    }
    Err(SupouError::Quadrature(format!(
        "Gamma-ray expectation not within relative {tol:e} at {MAX_LAGUERRE_NODES} nodes"
    )))
}

fn diagonal_expectation(m: &[GammaMarginal], g: &impl TiltedIntegrand, tol: f64) -> Result<DMatrix<f64>> {
    let d = m.len();
    let params: Vec<(f64, bool)> =
        m.iter().map(|g| if g.alpha > 1.0 { (g.alpha - 2.0, true) } else { (g.alpha - 1.0, false) }).collect();
    let pref = (-m.iter().map(|g| ln_gamma(g.alpha)).sum::<f64>()).exp();
    let tensor_sum = |n: usize| -> Result<DMatrix<f64>> {
        let rules: Vec<_> = params.iter().map(|(a, _)| laguerre_rule(n, *a)).collect();
        let total = n.pow(d as u32);
        let terms = try_map_indexed(Execution::available(), total, |idx| {
            let mut k = idx;
            let mut weight = 1.0;
            let mut diag = DVector::zeros(d);
            for i in 0..d {
                let j = k % n;
                k /= n;
                let x = rules[i].nodes[j];
                weight *= rules[i].weights[j] * if params[i].1 { x } else { 1.0 };
                diag[i] = -x / m[i].beta;
            }
            Ok::<_, SupouError>(g(&DMatrix::from_diagonal(&diag), 0.0)? * weight)
        })?;
        let mut it = terms.into_iter();
        let first = it.next().expect("nonempty rule");
        Ok(it.fold(first, |acc, t| acc + t) * pref)
    };
    let mut n = if d == 1 { MIN_LAGUERRE_NODES } else { 8 };
    let mut prev = tensor_sum(n)?;
    loop {
        let next_n = 2 * n;
        if next_n > MAX_LAGUERRE_NODES || next_n.pow(d as u32) > DIAGONAL_NODE_CAP.max(MAX_LAGUERRE_NODES) {
            break;
        }
        n = next_n;
        let next = tensor_sum(n)?;
        if converged(&prev, &next, tol) {
            return Ok(next);
        }
        prev = next;
    }
    Err(SupouError::Quadrature(format!("diagonal Gamma expectation not within relative {tol:e} at {n} nodes per axis")))
}
