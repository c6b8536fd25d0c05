//! Positive semi-definite supOU processes on `𝕊_d⁺` and a stochastic
//! volatility model driven by them.

mod moments;
mod pathwise;
mod simulate;
mod sv;

pub use moments::theoretical_psd_moments;
pub use pathwise::{integrated_cov, psd_sde_residual};
pub use simulate::{simulate_psd_paths, simulate_psd_paths_with, PsdPath, PsdPathBundle};
pub use sv::{conditional_cf, euler_log_prices, simulate_log_prices, SVModelSpec, SvBundle};

use nalgebra::DMatrix;

use crate::basis::{check_existence, ConditionStatus, GeneratingQuadruple, PoissonAtom, StateSpace};
use crate::error::{Result, SupouError};
use crate::matfun::{kron_sum, unvec};

/// A matrix-valued supOU process whose generating quadruple passes the
/// `𝕊_d⁺` existence checks.
#[derive(Debug, Clone)]
pub struct PSDSupOUSpec {
    pub quadruple: GeneratingQuadruple,
    pub label: String,
}

impl PSDSupOUSpec {
    pub fn new(quadruple: GeneratingQuadruple, label: impl Into<String>) -> Result<Self> {
        if !matches!(quadruple.space, StateSpace::Matrix(_)) {
            return Err(SupouError::InvalidArgument("PSD supOU needs a matrix state space".into()));
        }
        let report = check_existence(&quadruple)?;
        if report.status("existence") != Some(ConditionStatus::Holds) {
            let bad: Vec<String> = report
                .entries
                .iter()
                .filter(|e| e.status != ConditionStatus::Holds)
                .map(|e| format!("{} ({})", e.id, e.detail))
                .collect();
            return Err(SupouError::Precondition(format!("existence conditions not met: {}", bad.join("; "))));
        }
        Ok(Self { quadruple, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.quadruple.space.dim()
    }

    /// `γ₀` as a `d × d` matrix.
    pub fn gamma0_matrix(&self) -> Result<DMatrix<f64>> {
        Ok(unvec(&self.quadruple.gamma0()?, self.dim()))
    }
}

/// The same atom seen through `vec`: kernel `e^{(A⊕A)τ}` with decay constants
/// `κ²` and `2ρ`.
pub(crate) fn vec_atom(atom: &PoissonAtom) -> Result<PoissonAtom> {
    Ok(PoissonAtom {
        jump: atom.jump.clone(),
        a: kron_sum(&atom.a)?,
        kappa: atom.kappa * atom.kappa,
        rho: 2.0 * atom.rho,
        time: atom.time,
    })
}
