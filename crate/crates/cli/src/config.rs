//! JSON run configuration: strict schema, then validation into core types.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use supou::basis::{
    Drift, EigenFactorLaw, FactorLaw, GammaMarginal, GeneratingQuadruple, JumpDistribution, JumpKind,
    LevyMeasureModel, MatrixAtom, MixingMeasure, PolarLaw, PolarSeries, Ray, StateSpace, VectorLaw, WeightedRay,
};
use supou::process::SimulationConfig;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Simulate,
    Moments,
    Acov,
    Estimate,
    Check,
    Cf,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Moments => "moments",
            Task::Acov => "acov",
            Task::Estimate => "estimate",
            Task::Check => "check",
            Task::Cf => "cf",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateConfig {
    pub input: PathBuf,
    pub max_lag: usize,
    pub path_id: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub model: Option<GeneratingQuadruple>,
    pub sim: Option<SimulationConfig>,
    pub record_levy: bool,
    pub lags: Vec<f64>,
    pub u_points: Vec<DVector<f64>>,
    pub estimate: Option<EstimateConfig>,
    pub seed: u64,
    pub out: PathBuf,
}

// ---- raw schema ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: u32,
    model: Option<RawModel>,
    sim: Option<RawSim>,
    lags: Option<Vec<f64>>,
    u_points: Option<Vec<Vec<f64>>>,
    estimate: Option<RawEstimate>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "snake_case")]
enum RawSpace {
    Vector,
    Psd,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    space: Option<RawSpace>,
    gamma: Option<Mark>,
    gamma0: Option<Mark>,
    sigma: Option<MatrixValue>,
    levy: RawLevy,
    pi: RawPi,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevy {
    rate: f64,
    jumps: RawJumps,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkAtom {
    w: f64,
    x: Mark,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawJumps {
    Discrete { atoms: Vec<MarkAtom> },
    PowerLaw { direction: Mark, exponent: f64 },
    Exponential { scale: Mark },
    Gaussian { mean: Vec<f64>, cov: MatrixValue },
    RankOneWishart { law: RawVectorLaw },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorAtom {
    w: f64,
    x: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawVectorLaw {
    Discrete { atoms: Vec<VectorAtom> },
    Gaussian { mean: Vec<f64>, cov: MatrixValue },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrixAtom {
    w: f64,
    #[serde(rename = "A")]
    a: MatrixValue,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRay {
    #[serde(default = "one")]
    w: f64,
    #[serde(rename = "B")]
    b: MatrixValue,
    alpha: f64,
    #[serde(default = "one")]
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarginal {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactorAtom {
    w: f64,
    #[serde(rename = "S")]
    s: MatrixValue,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEigenAtom {
    w: f64,
    d: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawFactorLaw {
    Atoms { atoms: Vec<RawFactorAtom> },
    Series { base: MatrixValue, slope: MatrixValue, exponent: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawPi {
    Discrete {
        atoms: Vec<RawMatrixAtom>,
    },
    GammaRay {
        #[serde(rename = "B")]
        b: MatrixValue,
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
    },
    MultiGammaRay {
        rays: Vec<RawRay>,
    },
    DiagonalGamma {
        marginals: Vec<RawMarginal>,
    },
    PolarAtoms {
        rays: Vec<RawRay>,
    },
    PolarSeries {
        weight_exponent: f64,
        alpha: f64,
        beta0: f64,
        beta_exponent: f64,
        base: Vec<f64>,
        slope: Vec<f64>,
    },
    EigenFactor {
        s_law: RawFactorLaw,
        d_atoms: Vec<RawEigenAtom>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(default)]
    t_start: f64,
    t_end: f64,
    dt: f64,
    #[serde(default = "default_trunc_tol")]
    trunc_tol: f64,
    #[serde(default = "one_path")]
    n_paths: usize,
    /// Also write the driving Lévy process.
    #[serde(default)]
    record_levy: bool,
}

fn default_trunc_tol() -> f64 {
    1e-8
}

fn one_path() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimate {
    input: PathBuf,
    max_lag: usize,
    #[serde(default)]
    path_id: usize,
}

/// Row-major nested rows, or a lower triangle marked `"sym": true`.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixValue {
    Rows(Vec<Vec<f64>>),
    Sym(SymMatrix),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SymMatrix {
    sym: bool,
    lower: Vec<Vec<f64>>,
}

/// A mark: a flat vector, or a matrix flattened in column-stacking order.
#[derive(Deserialize)]
#[serde(untagged)]
enum Mark {
    Flat(Vec<f64>),
    Matrix(MatrixValue),
}

// ---- validation ----

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {msg}"))
}

fn finite(path: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(path, "must be finite"))
    }
}

fn matrix(path: &str, m: &MatrixValue) -> Result<DMatrix<f64>, CliError> {
    let out = match m {
        MatrixValue::Rows(rows) => {
            let n = rows.len();
            if n == 0 {
                return Err(invalid(path, "matrix must be nonempty"));
            }
            let c = rows[0].len();
            if c == 0 || rows.iter().any(|r| r.len() != c) {
                return Err(invalid(path, "matrix rows must be nonempty and of equal length"));
            }
            DMatrix::from_fn(n, c, |i, j| rows[i][j])
        }
        MatrixValue::Sym(SymMatrix { sym, lower }) => {
            if !sym {
                return Err(invalid(path, "a lower-triangle matrix needs \"sym\": true"));
            }
            let n = lower.len();
            if n == 0 || lower.iter().enumerate().any(|(i, r)| r.len() != i + 1) {
                return Err(invalid(path, "row i of a lower triangle must have i + 1 entries"));
            }
            DMatrix::from_fn(n, n, |i, j| if j <= i { lower[i][j] } else { lower[j][i] })
        }
    };
    if out.iter().any(|x| !x.is_finite()) {
        return Err(invalid(path, "matrix entries must be finite"));
    }
    Ok(out)
}

fn square(path: &str, m: &MatrixValue) -> Result<DMatrix<f64>, CliError> {
    let a = matrix(path, m)?;
    if a.nrows() != a.ncols() {
        return Err(invalid(path, format!("matrix must be square, got {} x {}", a.nrows(), a.ncols())));
    }
    Ok(a)
}

fn vector(path: &str, v: &[f64]) -> Result<DVector<f64>, CliError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(path, "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn mark(path: &str, m: &Mark, len: usize) -> Result<DVector<f64>, CliError> {
    let v = match m {
        Mark::Flat(v) => vector(path, v)?,
        Mark::Matrix(mv) => DVector::from_column_slice(matrix(path, mv)?.as_slice()),
    };
    if v.len() != len {
        return Err(invalid(path, format!("expected {len} entries, got {}", v.len())));
    }
    Ok(v)
}

/// Maps a core error raised while building a value at `path`.
fn at<T>(path: &str, r: supou::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| invalid(path, e))
}

fn gamma_ray(path: &str, b: &MatrixValue, alpha: f64, beta: f64) -> Result<Ray, CliError> {
    if !(alpha > 1.0) {
        return Err(invalid(&format!("{path}.alpha"), format!("alpha must exceed 1 (got {alpha})")));
    }
    let b = square(&format!("{path}.B"), b)?;
    at(path, Ray::new(b, alpha, beta))
}

fn rays(path: &str, rays: &[RawRay], require_alpha: bool) -> Result<Vec<WeightedRay>, CliError> {
    rays.iter()
        .enumerate()
        .map(|(i, r)| {
            let p = format!("{path}[{i}]");
            let ray = if require_alpha {
                gamma_ray(&p, &r.b, r.alpha, r.beta)?
            } else {
                at(&p, Ray::new(square(&format!("{p}.B"), &r.b)?, r.alpha, r.beta))?
            };
            Ok(WeightedRay { weight: finite(&format!("{p}.w"), r.w)?, ray })
        })
        .collect()
}

fn mixing(raw: &RawPi) -> Result<MixingMeasure, CliError> {
    let p = "model.pi";
    let pi = match raw {
        RawPi::Discrete { atoms } => MixingMeasure::DiscreteAtoms(
            atoms
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let q = format!("{p}.atoms[{i}]");
                    at(&q, MatrixAtom::new(a.w, square(&format!("{q}.A"), &a.a)?))
                })
                .collect::<Result<_, _>>()?,
        ),
        RawPi::GammaRay { b, alpha, beta } => MixingMeasure::GammaRay(gamma_ray(p, b, *alpha, *beta)?),
        RawPi::MultiGammaRay { rays: r } => MixingMeasure::MultiGammaRay(rays(&format!("{p}.rays"), r, true)?),
        RawPi::DiagonalGamma { marginals } => MixingMeasure::DiagonalGamma(
            marginals.iter().map(|m| GammaMarginal { alpha: m.alpha, beta: m.beta }).collect(),
        ),
        RawPi::PolarAtoms { rays: r } => {
            MixingMeasure::PolarNegDef(PolarLaw::Atoms(rays(&format!("{p}.rays"), r, false)?))
        }
        RawPi::PolarSeries { weight_exponent, alpha, beta0, beta_exponent, base, slope } => {
            MixingMeasure::PolarNegDef(PolarLaw::Series(PolarSeries {
                weight_exponent: *weight_exponent,
                alpha: *alpha,
                beta0: *beta0,
                beta_exponent: *beta_exponent,
                base: vector(&format!("{p}.base"), base)?,
                slope: vector(&format!("{p}.slope"), slope)?,
            }))
        }
        RawPi::EigenFactor { s_law, d_atoms } => {
            let s_law = match s_law {
                RawFactorLaw::Atoms { atoms } => FactorLaw::Atoms(
                    atoms
                        .iter()
                        .enumerate()
                        .map(|(i, a)| Ok((a.w, square(&format!("{p}.s_law.atoms[{i}].S"), &a.s)?)))
                        .collect::<Result<_, CliError>>()?,
                ),
                RawFactorLaw::Series { base, slope, exponent } => FactorLaw::Series {
                    base: square(&format!("{p}.s_law.base"), base)?,
                    slope: square(&format!("{p}.s_law.slope"), slope)?,
                    exponent: *exponent,
                },
            };
            let d_law = d_atoms
                .iter()
                .enumerate()
                .map(|(i, a)| Ok((a.w, vector(&format!("{p}.d_atoms[{i}].d"), &a.d)?)))
                .collect::<Result<_, CliError>>()?;
            MixingMeasure::EigenFactor(EigenFactorLaw { s_law, d_law })
        }
    };
    at(p, pi.validate())?;
    Ok(pi)
}

fn jumps(raw: &RawJumps, len: usize) -> Result<JumpKind, CliError> {
    let p = "model.levy.jumps";
    let vector_law = |law: &RawVectorLaw, d: usize| -> Result<VectorLaw, CliError> {
        let q = format!("{p}.law");
        Ok(match law {
            RawVectorLaw::Discrete { atoms } => VectorLaw::Discrete(
                atoms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let v = vector(&format!("{q}.atoms[{i}].x"), &a.x)?;
                        if v.len() != d {
                            return Err(invalid(&format!("{q}.atoms[{i}].x"), format!("expected {d} entries")));
                        }
                        Ok((a.w, v))
                    })
                    .collect::<Result<_, _>>()?,
            ),
            RawVectorLaw::Gaussian { mean, cov } => VectorLaw::Gaussian {
                mean: vector(&format!("{q}.mean"), mean)?,
                cov: square(&format!("{q}.cov"), cov)?,
            },
        })
    };
    Ok(match raw {
        RawJumps::Discrete { atoms } => JumpKind::DiscreteAtoms(
            atoms
                .iter()
                .enumerate()
                .map(|(i, a)| Ok((a.w, mark(&format!("{p}.atoms[{i}].x"), &a.x, len)?)))
                .collect::<Result<_, CliError>>()?,
        ),
        RawJumps::PowerLaw { direction, exponent } => JumpKind::PowerLawAtoms {
            direction: mark(&format!("{p}.direction"), direction, len)?,
            exponent: *exponent,
        },
        RawJumps::Exponential { scale } => JumpKind::Exponential { scale: mark(&format!("{p}.scale"), scale, len)? },
        RawJumps::Gaussian { mean, cov } => JumpKind::GaussianVector {
            mean: vector(&format!("{p}.mean"), mean)?,
            cov: square(&format!("{p}.cov"), cov)?,
        },
        RawJumps::RankOneWishart { law } => {
            let d = (len as f64).sqrt().round() as usize;
            JumpKind::RankOneWishart(vector_law(law, d)?)
        }
    })
}

fn model(raw: &RawModel) -> Result<GeneratingQuadruple, CliError> {
    let pi = mixing(&raw.pi)?;
    let d = pi.dim();
    let space = match raw.space.unwrap_or(RawSpace::Vector) {
        RawSpace::Vector => StateSpace::Vector(d),
        RawSpace::Psd => StateSpace::Matrix(d),
    };
    let len = space.mark_dim();
    let drift = match (&raw.gamma, &raw.gamma0) {
        (Some(_), Some(_)) => return Err(invalid("model", "give at most one of gamma and gamma0")),
        (Some(g), None) => Drift::Gamma(mark("model.gamma", g, len)?),
        (None, Some(g)) => Drift::Gamma0(mark("model.gamma0", g, len)?),
        (None, None) => Drift::Gamma0(DVector::zeros(len)),
    };
    let sigma = raw.sigma.as_ref().map(|s| square("model.sigma", s)).transpose()?;
    let rate = finite("model.levy.rate", raw.levy.rate)?;
    let law = at("model.levy.jumps", JumpDistribution::new(jumps(&raw.levy.jumps, len)?))?;
    let levy = at("model.levy", LevyMeasureModel::new(rate, law))?;
    at("model", GeneratingQuadruple::new(space, drift, sigma, levy, pi))
}

/// Parses and validates a configuration document for `task`. Relative file
/// names are resolved against `base_dir`.
pub fn load_config(text: &str, task: Task, base_dir: &Path) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema(if path == "." { e.inner().to_string() } else { format!("{path}: {}", e.inner()) })
    })?;
    if raw.schema != SCHEMA_VERSION {
        return Err(invalid("schema", format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema)));
    }
    let need = |present: bool, key: &str| {
        if present {
            Ok(())
        } else {
            Err(invalid(key, format!("required for task {}", task.name())))
        }
    };
    let model = raw.model.as_ref().map(model).transpose()?;
    let seed = raw.seed.unwrap_or(0);
    let sim = raw
        .sim
        .as_ref()
        .map(|s| {
            let cfg = SimulationConfig {
                t_start: s.t_start,
                t_end: s.t_end,
                dt: s.dt,
                trunc_tol: s.trunc_tol,
                n_paths: s.n_paths,
                seed,
                record_z: false,
            };
            at("sim", cfg.validate()).map(|_| cfg)
        })
        .transpose()?;
    let lags = raw.lags.clone().unwrap_or_default();
    for (i, &h) in lags.iter().enumerate() {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(invalid(&format!("lags[{i}]"), format!("lag must be finite and nonnegative, got {h}")));
        }
    }
    let dim = model.as_ref().map(|q| q.space.mark_dim());
    let u_points = raw
        .u_points
        .as_deref()
        .unwrap_or_default()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let p = format!("u_points[{i}]");
            let v = vector(&p, u)?;
            match dim {
                Some(d) if v.len() != d => Err(invalid(&p, format!("expected {d} entries, got {}", v.len()))),
                _ => Ok(v),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let estimate = raw
        .estimate
        .as_ref()
        .map(|e| {
            let input = base_dir.join(&e.input);
            if task == Task::Estimate && !input.is_file() {
                return Err(invalid("estimate.input", format!("file {} not found", input.display())));
            }
            Ok(EstimateConfig { input, max_lag: e.max_lag, path_id: e.path_id })
        })
        .transpose()?;
    match task {
        Task::Check | Task::Moments => need(model.is_some(), "model")?,
        Task::Simulate => {
            need(model.is_some(), "model")?;
            need(sim.is_some(), "sim")?;
        }
        Task::Acov => {
            need(model.is_some(), "model")?;
            need(!lags.is_empty(), "lags")?;
        }
        Task::Cf => {
            need(model.is_some(), "model")?;
            need(!u_points.is_empty(), "u_points")?;
        }
        Task::Estimate => need(estimate.is_some(), "estimate")?,
    }
    Ok(RunConfig {
        task,
        model,
        sim,
        record_levy: raw.sim.as_ref().is_some_and(|s| s.record_levy),
        lags,
        u_points,
        estimate,
        seed,
        out: raw.out.map(|o| base_dir.join(o)).unwrap_or_else(|| PathBuf::from(".")),
    })
}
