//! Lévy bases: generating quadruples, jump and mixing laws, condition
//! checkers, and the Poisson atom sampler.

pub mod conditions;
pub mod levy;
pub mod mixing;
pub mod quadrature;
pub mod sampler;
pub mod special;

use nalgebra::{DMatrix, DVector};

pub use conditions::{
    check_existence, check_moment_conditions, check_path_conditions, ConditionReport, ConditionStatus,
};
pub use levy::{JumpDistribution, JumpKind, LevyMeasureModel, VectorLaw};
pub use mixing::{
    pi_expectation, pi_expectation_tilted, DecayFunctional, EigenFactorLaw, FactorLaw, GammaMarginal, MatrixAtom,
    MixingMeasure, PolarLaw, PolarSeries, Ray, SampledMatrix, WeightedRay,
};
pub use sampler::{sample_poisson_atoms, PoissonAtom};

use crate::error::{Result, SupouError};

/// Value of a nonnegative integral that may be infinite or out of reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integral {
    Finite(f64),
    /// Finite, with only an upper bound available.
    Bounded(f64),
    Infinite,
    Unavailable,
}

impl Integral {
    pub fn scale(self, c: f64) -> Self {
        match self {
            Integral::Finite(v) => Integral::Finite(v * c),
            Integral::Bounded(v) => Integral::Bounded(v * c),
            Integral::Infinite if c == 0.0 => Integral::Finite(0.0),
            other => other,
        }
    }

    pub fn add(self, other: Self) -> Self {
        use Integral::*;
        match (self, other) {
            (Infinite, _) | (_, Infinite) => Infinite,
            (Unavailable, _) | (_, Unavailable) => Unavailable,
            (Finite(a), Finite(b)) => Finite(a + b),
            (Finite(a) | Bounded(a), Finite(b) | Bounded(b)) => Bounded(a + b),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Integral::Finite(v) | Integral::Bounded(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Integral::Finite(_) | Integral::Bounded(_))
    }
}

/// State space of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSpace {
    /// `ℝ^d`
    Vector(usize),
    /// Symmetric `d × d` matrices, marks stored as `vec`.
    Matrix(usize),
}

impl StateSpace {
    /// Dimension of `A`.
    pub fn dim(self) -> usize {
        match self {
            StateSpace::Vector(d) | StateSpace::Matrix(d) => d,
        }
    }

    /// Length of a mark vector.
    pub fn mark_dim(self) -> usize {
        match self {
            StateSpace::Vector(d) => d,
            StateSpace::Matrix(d) => d * d,
        }
    }
}

/// Drift as supplied: either `γ` or the small-jump-compensated `γ₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    Gamma(DVector<f64>),
    Gamma0(DVector<f64>),
}

/// Generating quadruple `(γ, Σ, ν, π)` of a homogeneous factorizable Lévy basis.
#[derive(Debug, Clone)]
pub struct GeneratingQuadruple {
    pub space: StateSpace,
    pub drift: Drift,
    /// Gaussian covariance `Σ` on the mark space, if any.
    pub gaussian: Option<DMatrix<f64>>,
    pub levy: LevyMeasureModel,
    pub pi: MixingMeasure,
}

impl GeneratingQuadruple {
    pub fn new(
        space: StateSpace,
        drift: Drift,
        gaussian: Option<DMatrix<f64>>,
        levy: LevyMeasureModel,
        pi: MixingMeasure,
    ) -> Result<Self> {
        let m = space.mark_dim();
        let dv = match &drift {
            Drift::Gamma(v) | Drift::Gamma0(v) => v,
        };
        if dv.len() != m || dv.iter().any(|x| !x.is_finite()) {
            return Err(SupouError::InvalidArgument(format!("drift must be a finite vector of length {m}")));
        }
        if levy.jumps.mark_dim() != m {
            return Err(SupouError::InvalidArgument(format!(
                "jump marks have length {}, expected {m}",
                levy.jumps.mark_dim()
            )));
        }
        pi.validate()?;
        if pi.dim() != space.dim() {
            return Err(SupouError::InvalidArgument(format!(
                "mixing measure acts on dimension {}, expected {}",
                pi.dim(),
                space.dim()
            )));
        }
        if let Some(s) = &gaussian {
            if s.nrows() != m || s.ncols() != m {
                return Err(SupouError::InvalidArgument(format!("Gaussian covariance must be {m} x {m}")));
            }
            let ev = nalgebra::SymmetricEigen::new(s.clone()).eigenvalues;
            if (s - s.transpose()).abs().max() > 1e-12 * s.abs().max().max(1.0)
                || ev.min() < -1e-12 * ev.abs().max().max(1.0)
            {
                return Err(SupouError::InvalidArgument("Gaussian covariance must be symmetric PSD".into()));
            }
        }
        Ok(Self { space, drift, gaussian, levy, pi })
    }

    /// Whether a nonzero Gaussian part is present.
    pub fn has_gaussian(&self) -> bool {
        self.gaussian.as_ref().map(|s| s.abs().max() > 0.0).unwrap_or(false)
    }

    /// `γ` (compensated with jumps of norm at most one).
    pub fn gamma(&self) -> Result<DVector<f64>> {
        match &self.drift {
            Drift::Gamma(g) => Ok(g.clone()),
            Drift::Gamma0(g0) => Ok(g0 + self.truncated_mean()?),
        }
    }

    /// `γ₀ = γ − ∫_{‖x‖≤1} x ν(dx)`.
    pub fn gamma0(&self) -> Result<DVector<f64>> {
        match &self.drift {
            Drift::Gamma(g) => Ok(g - self.truncated_mean()?),
            Drift::Gamma0(g0) => Ok(g0.clone()),
        }
    }

    /// `γ₁ = γ + ∫_{‖x‖>1} x ν(dx)`, the mean of the underlying Lévy process.
    pub fn gamma1(&self) -> Result<DVector<f64>> {
        let tail = self
            .levy
            .tail_mean()
            .ok_or_else(|| SupouError::Moment("first moment of the large jumps is unavailable".into()))?;
        Ok(self.gamma()? + tail)
    }

    /// `M = Σ + ∫ x xᵀ ν(dx)`.
    pub fn second_moment(&self) -> Result<DMatrix<f64>> {
        let mut m = self
            .levy
            .second_moment()
            .ok_or_else(|| SupouError::Moment("second moment of the jumps is unavailable".into()))?;
        if let Some(s) = &self.gaussian {
            m += s;
        }
        Ok(m)
    }

    fn truncated_mean(&self) -> Result<DVector<f64>> {
        self.levy.truncated_mean().ok_or_else(|| {
            SupouError::UnsupportedModel("truncated jump mean is unavailable for this jump law; supply gamma0".into())
        })
    }
}
