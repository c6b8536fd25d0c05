//! Existence, moment and path-property condition checkers.

use std::fmt;

use super::mixing::DecayFunctional;
use super::{GeneratingQuadruple, Integral, MixingMeasure, StateSpace};
use crate::error::Result;

/// Grid of `ε` values for the per-`ε` necessary condition.
pub const NECESSARY_EPS_GRID: [f64; 3] = [1.0, 0.5, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionStatus {
    Holds,
    Fails,
    Undecidable,
}

impl fmt::Display for ConditionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionStatus::Holds => "holds",
            ConditionStatus::Fails => "fails",
            ConditionStatus::Undecidable => "undecidable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub id: String,
    pub status: ConditionStatus,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn get(&self, id: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn status(&self, id: &str) -> Option<ConditionStatus> {
        self.get(id).map(|e| e.status)
    }

    fn push(&mut self, id: impl Into<String>, status: ConditionStatus, value: Option<f64>, detail: impl Into<String>) {
        self.entries.push(ConditionEntry { id: id.into(), status, value, detail: detail.into() });
    }

    /// Records a finiteness condition from an evaluated integral.
    fn finiteness(&mut self, id: &str, what: &str, v: Integral) {
        match v {
            Integral::Finite(x) => self.push(id, ConditionStatus::Holds, Some(x), format!("{what} = {x}")),
            Integral::Bounded(x) => {
                self.push(id, ConditionStatus::Holds, Some(x), format!("{what} finite; value is an upper bound"))
            }
            Integral::Infinite => self.push(id, ConditionStatus::Fails, None, format!("{what} divergent")),
            Integral::Unavailable => self.push(
                id,
                ConditionStatus::Undecidable,
                None,
                format!("{what} not available in closed form; monte_carlo_fallback"),
            ),
        }
    }

    fn combine(&self, ids: &[&str]) -> ConditionStatus {
        let st: Vec<_> = ids.iter().filter_map(|id| self.status(id)).collect();
        if st.contains(&ConditionStatus::Fails) {
            ConditionStatus::Fails
        } else if st.iter().all(|s| *s == ConditionStatus::Holds) {
            ConditionStatus::Holds
        } else {
            ConditionStatus::Undecidable
        }
    }
}

fn kappa_power(q: &GeneratingQuadruple) -> f64 {
    match q.space {
        StateSpace::Vector(_) => 1.0,
        StateSpace::Matrix(_) => 2.0,
    }
}

fn decay_bound_entry(report: &mut ConditionReport, id: &str) {
    report.push(
        id,
        ConditionStatus::Holds,
        None,
        "every matrix in the support of π is stable and diagonalizable with explicit (κ, ρ)",
    );
}

/// Describes which grouped verdict the existence entry used.
fn existence_verdict(report: &mut ConditionReport, sufficient: &[&[&str]], necessary: &[&str]) {
    let nec = report.combine(necessary);
    let suff: Vec<ConditionStatus> = sufficient.iter().map(|set| report.combine(set)).collect();
    let (status, detail) = if suff.contains(&ConditionStatus::Holds) {
        (ConditionStatus::Holds, "a sufficient set of conditions holds")
    } else if nec == ConditionStatus::Fails {
        (ConditionStatus::Fails, "a necessary condition fails")
    } else {
        (ConditionStatus::Undecidable, "no sufficient set holds and no necessary condition fails")
    };
    report.push("existence", status, None, detail);
}

/// Existence checks for the stationary integral.
pub fn check_existence(q: &GeneratingQuadruple) -> Result<ConditionReport> {
    let mut report = ConditionReport::default();
    let pi = &q.pi;
    let log_tail = q.levy.log_tail();
    let c2 = pi.decay_functional(DecayFunctional::KappaPowOverRho(2.0))?;
    match q.space {
        StateSpace::Vector(_) => {
            report.finiteness("c3", "∫_{‖x‖>1} ln‖x‖ ν(dx)", log_tail);
            decay_bound_entry(&mut report, "c1");
            report.finiteness("c2", c2_label(pi), c2);
            let small = q.levy.small_jump_abs();
            let fvc3 = match (log_tail, small) {
                (a, b) if a.is_finite() && b.is_finite() => a,
                (Integral::Infinite, _) => Integral::Infinite,
                // Compound Poisson: ∫_{‖x‖≤1}‖x‖ν ≤ ν(ℝ^d) < ∞.
                (a, _) => a,
            };
            report.finiteness("fvc3", "∫_{‖x‖>1} ln‖x‖ ν(dx) and ∫_{‖x‖≤1} ‖x‖ ν(dx)", fvc3);
            decay_bound_entry(&mut report, "fvc1");
            let fvc2 = pi.decay_functional(DecayFunctional::KappaPowOverRho(1.0))?;
            report.finiteness("fvc2", "E_π[κ/ρ]", fvc2);
            if q.has_gaussian() {
                report.push("fv_gaussian", ConditionStatus::Fails, None, "Gaussian part present");
            } else {
                report.push("fv_gaussian", ConditionStatus::Holds, Some(0.0), "no Gaussian part");
            }
            report.push("nc1", ConditionStatus::Holds, None, "ϑ(A) = 1/κ(A) with τ(A) = −min Re σ(A)");
            let mut necessary = vec!["nc1".to_string(), "nc3".to_string()];
            for eps in NECESSARY_EPS_GRID {
                let id = format!("nc2a(eps={eps})");
                let applies = q.levy.rate > 0.0
                    && q.levy.jumps.exceeds_with_positive_probability(1.0 / eps)
                    && pi.theta_mass_at_least(eps)?;
                if applies {
                    let v = pi.decay_functional(DecayFunctional::IndicatorOverTau(eps))?;
                    report.finiteness(&id, &format!("E_π[1{{ϑ ≥ {eps}}}/τ]"), v);
                } else {
                    report.push(&id, ConditionStatus::Holds, None, "not applicable for this ε");
                }
                necessary.push(id);
            }
            let small_mass = q.levy.rate > 0.0 && q.levy.jumps.below_with_positive_probability(1.0);
            let gauss_injective = q
                .gaussian
                .as_ref()
                .map(|s| s.nrows() > 0 && s.clone().singular_values().min() > 0.0)
                .unwrap_or(false);
            if small_mass || gauss_injective {
                let v = pi.decay_functional(DecayFunctional::ThetaSqOverTau)?;
                report.finiteness("nc2b", "E_π[ϑ²/τ]", v);
            } else {
                report.push("nc2b", ConditionStatus::Holds, None, "not applicable: j(Σ) = 0 and no small jumps");
            }
            necessary.push("nc2b".into());
            report.finiteness("nc3", "∫_{‖x‖>1} ln‖x‖ ν(dx)", log_tail);
            let nec: Vec<&str> = necessary.iter().map(|s| s.as_str()).collect();
            existence_verdict(&mut report, &[&["c3", "c1", "c2"], &["fvc3", "fvc1", "fvc2", "fv_gaussian"]], &nec);
        }
        StateSpace::Matrix(d) => {
            report.finiteness("c3", "∫_{‖x‖>1} ln‖x‖ ν(dx)", log_tail);
            report.finiteness("small_jumps", "∫_{‖x‖≤1} ‖x‖ ν(dx)", q.levy.small_jump_abs().add(Integral::Finite(0.0)));
            decay_bound_entry(&mut report, "c1");
            report.finiteness("c2", "E_π[κ²/ρ]", c2);
            let jumps_psd = q.levy.rate == 0.0 || q.levy.jumps.is_psd_valued(d);
            report.push(
                "jumps_psd",
                if jumps_psd { ConditionStatus::Holds } else { ConditionStatus::Fails },
                None,
                "ν concentrated on positive semi-definite matrices",
            );
            let g0 = match q.gamma0() {
                Ok(g0) => {
                    let m = nalgebra::DMatrix::from_column_slice(d, d, g0.as_slice());
                    let sym = (&m - m.transpose()).abs().max() <= 1e-12 * m.abs().max().max(1.0);
                    let min_ev = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.min();
                    if sym && min_ev >= -1e-12 * m.abs().max().max(1.0) {
                        (ConditionStatus::Holds, Some(min_ev), "γ₀ is positive semi-definite".to_string())
                    } else {
                        (ConditionStatus::Fails, Some(min_ev), "γ₀ is not positive semi-definite".to_string())
                    }
                }
                Err(e) => (ConditionStatus::Undecidable, None, e.to_string()),
            };
            report.push("gamma0_psd", g0.0, g0.1, g0.2);
            if q.has_gaussian() {
                report.push("no_gaussian", ConditionStatus::Fails, None, "matrix-valued bases have no Gaussian part");
            } else {
                report.push("no_gaussian", ConditionStatus::Holds, None, "no Gaussian part");
            }
            let all = ["c3", "small_jumps", "c1", "c2", "jumps_psd", "gamma0_psd", "no_gaussian"];
            let st = report.combine(&all);
            let detail = match st {
                ConditionStatus::Holds => "all conditions hold",
                ConditionStatus::Fails => "a required condition fails",
                ConditionStatus::Undecidable => "some condition could not be evaluated",
            };
            report.push("existence", st, None, detail);
        }
    }
    Ok(report)
}

fn c2_label(pi: &MixingMeasure) -> &'static str {
    match pi {
        MixingMeasure::GammaRay(r) if r.bound.kappa == 1.0 => "E_π[1/ρ]",
        _ => "E_π[κ²/ρ]",
    }
}

/// Sufficient conditions for a finite `r`-th moment.
pub fn check_moment_conditions(q: &GeneratingQuadruple, r: f64) -> Result<ConditionReport> {
    let mut report = ConditionReport::default();
    if !(r > 0.0 && r.is_finite()) {
        report.push("moment", ConditionStatus::Undecidable, None, format!("moment order {r} is not positive"));
        return Ok(report);
    }
    report.finiteness("jump_moment", &format!("∫_{{‖x‖>1}} ‖x‖^{r} ν(dx)"), q.levy.r_moment_tail(r));
    let (split, power) = match q.space {
        StateSpace::Vector(_) => (2.0, r),
        StateSpace::Matrix(_) => (1.0, 2.0 * r),
    };
    let mut ids = vec!["jump_moment"];
    if r > split {
        let v = q.pi.decay_functional(DecayFunctional::KappaPowOverRho(power))?;
        report.finiteness("mixing_moment", &format!("E_π[κ^{power}/ρ]"), v);
        ids.push("mixing_moment");
    }
    let st = report.combine(&ids);
    report.push("moment", st, None, format!("finite moment of order {r}"));
    Ok(report)
}

/// Path-regularity conditions: local boundedness, integrability of `Z`, and
/// the SDE representation.
pub fn check_path_conditions(q: &GeneratingQuadruple) -> Result<ConditionReport> {
    let mut report = ConditionReport::default();
    let p = kappa_power(q);
    let fv = !q.has_gaussian() || q.pi.discrete_atoms().is_some();
    report.push(
        "finite_variation",
        if fv { ConditionStatus::Holds } else { ConditionStatus::Fails },
        None,
        if fv { "no Gaussian part, or π is discrete" } else { "Gaussian part with non-discrete π" },
    );
    let k = if p == 1.0 { "κ" } else { "κ²" };
    report.finiteness("condbound", &format!("E_π[{k}]"), q.pi.decay_functional(DecayFunctional::KappaPow(p))?);
    report.finiteness(
        "exZcond",
        &format!("E_π[(‖A‖ ∨ 1){k}/ρ]"),
        q.pi.decay_functional(DecayFunctional::NormOrOneKappaPowOverRho(p))?,
    );
    report.finiteness(
        "boundZcond",
        &format!("E_π[‖A‖{k}]"),
        q.pi.decay_functional(DecayFunctional::NormKappaPow(p))?,
    );
    Ok(report)
}
