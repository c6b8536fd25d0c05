//! The vector-valued supOU process: simulation, second-order structure,
//! characteristic function, and pathwise identities.

pub(crate) mod cf;
pub(crate) mod moments;
pub(crate) mod pathwise;
pub(crate) mod simulate;

pub use cf::{characteristic_function, log_characteristic_function};
pub use moments::{
    acov_gamma_ray_closed_form, acov_multi_gamma_ray_closed_form, second_order_summary, theoretical_acov,
    theoretical_mean, theoretical_var, SecondOrderSummary,
};
pub use pathwise::{integrated_process, sde_residual, IntegratedPaths, ZIntegration};
pub use simulate::{simulate_paths, simulate_paths_with, truncation_horizon, GaussianTrack, PathBundle, SamplePath};

use crate::basis::{
    check_existence, check_moment_conditions, ConditionStatus, GeneratingQuadruple, StateSpace,
};
use crate::error::{Result, SupouError};

/// Tolerance used for every expectation over `π` in the theoretical formulas.
pub const THEORY_TOL: f64 = 1e-11;

/// A vector supOU process given by a generating quadruple that passes the
/// existence checks.
#[derive(Debug, Clone)]
pub struct SupOUSpec {
    pub quadruple: GeneratingQuadruple,
    pub label: String,
}

impl SupOUSpec {
    pub fn new(quadruple: GeneratingQuadruple, label: impl Into<String>) -> Result<Self> {
        if !matches!(quadruple.space, StateSpace::Vector(_)) {
            return Err(SupouError::InvalidArgument("vector supOU needs a vector state space".into()));
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

    pub(crate) fn require_second_moments(&self) -> Result<()> {
        let rep = check_moment_conditions(&self.quadruple, 2.0)?;
        if rep.status("moment") != Some(ConditionStatus::Holds) {
            let detail = rep.entries.iter().map(|e| format!("{}: {}", e.id, e.detail)).collect::<Vec<_>>().join("; ");
            return Err(SupouError::Moment(format!("second moments not established ({detail})")));
        }
        Ok(())
    }
}

/// Output grid, window and truncation settings for the simulators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub trunc_tol: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Also record `Z_u`.
    pub record_z: bool,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SupouError::InvalidArgument(m));
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start < self.t_end) {
            return bad(format!("need t_start < t_end, got [{}, {}]", self.t_start, self.t_end));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        let n = (self.t_end - self.t_start) / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
            return bad(format!("dt = {} does not divide the window length {}", self.dt, self.t_end - self.t_start));
        }
        if !(self.trunc_tol > 0.0 && self.trunc_tol <= 1e-2) {
            return bad(format!("trunc_tol must lie in (0, 1e-2], got {}", self.trunc_tol));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be positive".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    pub(crate) fn grid(&self) -> Grid {
        Grid { t_start: self.t_start, dt: self.dt, n: self.steps() }
    }
}

/// Equispaced grid `t_k = t_start + k dt`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Grid {
    pub t_start: f64,
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.time(k)).collect()
    }

    /// First index with `t_k ≥ s`, or `None` past the end.
    pub fn first_at_or_after(&self, s: f64) -> Option<usize> {
        let guess = ((s - self.t_start) / self.dt).ceil();
        let mut k = if guess.is_finite() && guess > 0.0 { guess as usize } else { 0 };
        while k > 0 && self.time(k - 1) >= s {
            k -= 1;
        }
        while k <= self.n && self.time(k) < s {
            k += 1;
        }
        (k <= self.n).then_some(k)
    }
}

