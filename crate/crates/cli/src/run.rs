//! Task dispatch and artifact emission.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use supou::basis::{
    check_existence, check_moment_conditions, check_path_conditions, ConditionReport, ConditionStatus,
    GeneratingQuadruple, StateSpace,
};
use supou::inference::{empirical_second_order, fit_gamma_ray, recover_levy_moments};
use supou::process::{characteristic_function, second_order_summary, simulate_paths, SupOUSpec};
use supou::psd::{simulate_psd_paths, theoretical_psd_moments, PSDSupOUSpec};
use supou::SupouError;

use crate::config::{EstimateConfig, RunConfig, Task, SCHEMA_VERSION};
use crate::error::CliError;

/// Result of a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn model(cfg: &RunConfig) -> &GeneratingQuadruple {
    cfg.model.as_ref().expect("validated config has a model")
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    fs::create_dir_all(&cfg.out)?;
    match cfg.task {
        Task::Check => check(cfg),
        Task::Simulate => simulate(cfg),
        Task::Moments => moments(cfg, false),
        Task::Acov => moments(cfg, true),
        Task::Cf => cf(cfg),
        Task::Estimate => estimate(cfg, cfg.estimate.as_ref().expect("validated config has an estimate section")),
    }
}

fn done(path: PathBuf) -> Result<Outcome, CliError> {
    Ok(Outcome { exit_code: 0, artifacts: vec![path] })
}

// ---- check ----

#[derive(Serialize)]
struct EntryJson<'a> {
    id: &'a str,
    status: String,
    value: Option<f64>,
    detail: &'a str,
}

#[derive(Serialize)]
struct SectionJson<'a> {
    status: String,
    entries: Vec<EntryJson<'a>>,
}

#[derive(Serialize)]
struct CheckJson<'a> {
    schema: u32,
    task: &'static str,
    existence: SectionJson<'a>,
    moments: SectionJson<'a>,
    paths: SectionJson<'a>,
}

fn overall(r: &ConditionReport) -> ConditionStatus {
    let st: Vec<_> = r.entries.iter().map(|e| e.status).collect();
    if st.contains(&ConditionStatus::Fails) {
        ConditionStatus::Fails
    } else if st.iter().all(|s| *s == ConditionStatus::Holds) {
        ConditionStatus::Holds
    } else {
        ConditionStatus::Undecidable
    }
}

fn section(r: &ConditionReport, status: ConditionStatus) -> SectionJson<'_> {
    SectionJson {
        status: status.to_string(),
        entries: r
            .entries
            .iter()
            .map(|e| EntryJson {
                id: &e.id,
                status: e.status.to_string(),
                value: e.value.filter(|v| v.is_finite()),
                detail: &e.detail,
            })
            .collect(),
    }
}

fn check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let q = model(cfg);
    let existence = check_existence(q)?;
    let moments = check_moment_conditions(q, 2.0)?;
    let paths = check_path_conditions(q)?;
    let exists = existence.status("existence").unwrap_or_else(|| overall(&existence));
    let report = CheckJson {
        schema: SCHEMA_VERSION,
        task: "check",
        existence: section(&existence, exists),
        moments: section(&moments, overall(&moments)),
        paths: section(&paths, overall(&paths)),
    };
    let path = cfg.out.join("report.json");
    write_json(&path, &report)?;
    Ok(Outcome { exit_code: if exists == ConditionStatus::Holds { 0 } else { 4 }, artifacts: vec![path] })
}

// ---- simulate ----

fn vec_label(prefix: &str, k: usize, d: usize) -> String {
    format!("{prefix}_{}{}", k % d + 1, k / d + 1)
}

fn path_rows<'a>(
    times: &'a [f64],
    id: usize,
    values: &'a DMatrix<f64>,
    levy: Option<&'a DMatrix<f64>>,
) -> impl Iterator<Item = Vec<String>> + 'a {
    (0..times.len()).map(move |k| {
        let mut row = vec![num(times[k]), id.to_string()];
        row.extend(values.column(k).iter().map(|&x| num(x)));
        if let Some(l) = levy {
            row.extend(l.column(k).iter().map(|&x| num(x)));
        }
        row
    })
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let q = model(cfg).clone();
    let mut sim = cfg.sim.clone().expect("validated config has a sim section");
    sim.seed = cfg.seed;
    let path = cfg.out.join("paths.csv");
    let mut header = vec!["t".to_string(), "path_id".to_string()];
    match q.space {
        StateSpace::Vector(d) => {
            let spec = SupOUSpec::new(q, "cli")?;
            let b = simulate_paths(&spec, &sim)?;
            header.extend((1..=d).map(|i| format!("X_{i}")));
            if cfg.record_levy {
                header.extend((1..=d).map(|i| format!("L_{i}")));
            }
            let rows = b.paths.iter().enumerate().flat_map(|(p, sp)| {
                path_rows(&b.times, p, &sp.x, cfg.record_levy.then_some(&sp.l))
            });
            write_csv(&path, &header, rows)?;
        }
        StateSpace::Matrix(d) => {
            let spec = PSDSupOUSpec::new(q, "cli")?;
            let b = simulate_psd_paths(&spec, &sim)?;
            header.extend((0..d * d).map(|k| vec_label("S", k, d)));
            if cfg.record_levy {
                header.extend((0..d * d).map(|k| vec_label("L", k, d)));
            }
            let rows = b.paths.iter().enumerate().flat_map(|(p, sp)| {
                path_rows(&b.times, p, &sp.sigma, cfg.record_levy.then_some(&sp.l))
            });
            write_csv(&path, &header, rows)?;
        }
    }
    done(path)
}

// ---- moments / acov ----

fn matrix_rows<'a>(prefix: Vec<String>, m: &'a DMatrix<f64>) -> impl Iterator<Item = Vec<String>> + 'a {
    let (r, c) = m.shape();
    (0..c).flat_map(move |j| {
        let prefix = prefix.clone();
        (0..r).map(move |i| {
            let mut row = prefix.clone();
            row.extend([(i + 1).to_string(), (j + 1).to_string(), num(m[(i, j)])]);
            row
        })
    })
}

fn moments(cfg: &RunConfig, acov_only: bool) -> Result<Outcome, CliError> {
    let q = model(cfg).clone();
    let summary = match q.space {
        StateSpace::Vector(_) => second_order_summary(&SupOUSpec::new(q, "cli")?, &cfg.lags)?,
        StateSpace::Matrix(_) => theoretical_psd_moments(&PSDSupOUSpec::new(q, "cli")?, &cfg.lags)?,
    };
    let s = |x: &str| x.to_string();
    if acov_only {
        let path = cfg.out.join("acov.csv");
        let rows: Vec<Vec<String>> =
            summary.acov.iter().flat_map(|(h, m)| matrix_rows(vec![num(*h)], m).collect::<Vec<_>>()).collect();
        write_csv(&path, &[s("lag"), s("i"), s("j"), s("value")], rows)?;
        return done(path);
    }
    let path = cfg.out.join("moments.csv");
    let mean = DMatrix::from_column_slice(summary.mean.len(), 1, summary.mean.as_slice());
    let mut rows: Vec<Vec<String>> = matrix_rows(vec![s("mean"), num(0.0)], &mean).collect();
    rows.extend(matrix_rows(vec![s("var"), num(0.0)], &summary.variance));
    for (h, m) in &summary.acov {
        rows.extend(matrix_rows(vec![s("acov"), num(*h)], m));
    }
    write_csv(&path, &[s("kind"), s("lag"), s("i"), s("j"), s("value")], rows)?;
    done(path)
}

// ---- cf ----

fn cf(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let q = model(cfg).clone();
    let d = match q.space {
        StateSpace::Vector(d) => d,
        StateSpace::Matrix(_) => {
            return Err(SupouError::UnsupportedModel("the cf task needs a vector model".into()).into());
        }
    };
    let spec = SupOUSpec::new(q, "cli")?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("u_{i}")).collect();
    header.extend(["re".to_string(), "im".to_string()]);
    let rows = cfg
        .u_points
        .iter()
        .map(|u| {
            let z = characteristic_function(&spec, u)?;
            let mut row: Vec<String> = u.iter().map(|&x| num(x)).collect();
            row.extend([num(z.re), num(z.im)]);
            Ok(row)
        })
        .collect::<Result<Vec<_>, SupouError>>()?;
    let path = cfg.out.join("cf.csv");
    write_csv(&path, &header, rows)?;
    done(path)
}

// ---- estimate ----

/// Times and `X` columns of one path from a `paths.csv` file.
pub fn read_path(file: &Path, path_id: usize) -> Result<(Vec<f64>, DMatrix<f64>), CliError> {
    let data = |m: String| CliError::Core(SupouError::Data(format!("{}: {m}", file.display())));
    let mut r = csv::Reader::from_path(file).map_err(|e| data(e.to_string()))?;
    let header = r.headers().map_err(|e| data(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(t_col), Some(id_col)) = (col("t"), col("path_id")) else {
        return Err(data("header needs t and path_id columns".into()));
    };
    let x_cols: Vec<usize> = (1..).map_while(|i| col(&format!("X_{i}"))).collect();
    if x_cols.is_empty() {
        return Err(data("no X_1.. columns; estimation needs a vector path".into()));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| data(e.to_string()))?;
        let field = |c: usize| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| data(format!("row {}: column {} is not a number", line + 2, &header[c])))
        };
        let id = rec.get(id_col).and_then(|s| s.parse::<usize>().ok());
        if id != Some(path_id) {
            continue;
        }
        times.push(field(t_col)?);
        for &c in &x_cols {
            values.push(field(c)?);
        }
    }
    if times.is_empty() {
        return Err(data(format!("no rows for path_id {path_id}")));
    }
    Ok((times.clone(), DMatrix::from_column_slice(x_cols.len(), times.len(), &values)))
}

#[derive(Serialize)]
struct DiagnosticsJson {
    nls_residual: f64,
    gradient_norm: f64,
    iterations: usize,
    curve_used: usize,
    imag_residue: f64,
    /// Per lag, `[re, im]` pairs by decreasing modulus.
    eigencurves: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct FitJson {
    schema: u32,
    task: &'static str,
    n_obs: usize,
    delta: f64,
    max_lag: usize,
    alpha_hat: f64,
    lambda_hat: f64,
    #[serde(rename = "B_hat")]
    b_hat: Vec<Vec<f64>>,
    gamma1_hat: Vec<f64>,
    #[serde(rename = "M_hat")]
    m_hat: Vec<Vec<f64>>,
    sample_mean: Vec<f64>,
    diagnostics: DiagnosticsJson,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn estimate(cfg: &RunConfig, est: &EstimateConfig) -> Result<Outcome, CliError> {
    let (times, x) = read_path(&est.input, est.path_id)?;
    let bad = |m: String| CliError::Core(SupouError::Data(m));
    if times.len() < 2 {
        return Err(bad("path needs at least two rows".into()));
    }
    let delta = times[1] - times[0];
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - delta).abs() <= 1e-9 * delta.abs().max(1e-300));
    if !(delta > 0.0) || !uniform {
        return Err(bad("time column must be increasing with a constant step".into()));
    }
    let (mean, acov) = empirical_second_order(&x, delta, est.max_lag)?;
    let fit = fit_gamma_ray(&acov)?;
    let (gamma1, m) = recover_levy_moments(&mean, &acov.matrices[0], &fit)?;
    let report = FitJson {
        schema: SCHEMA_VERSION,
        task: "estimate",
        n_obs: x.ncols(),
        delta,
        max_lag: est.max_lag,
        alpha_hat: fit.alpha_hat,
        lambda_hat: fit.lambda_hat,
        b_hat: rows_of(&fit.b_hat),
        gamma1_hat: gamma1.iter().copied().collect(),
        m_hat: rows_of(&m),
        sample_mean: DVector::iter(&mean).copied().collect(),
        diagnostics: DiagnosticsJson {
            nls_residual: fit.diagnostics.nls_residual,
            gradient_norm: fit.diagnostics.gradient_norm,
            iterations: fit.diagnostics.iterations,
            curve_used: fit.diagnostics.curve_used,
            imag_residue: fit.diagnostics.imag_residue,
            eigencurves: fit.diagnostics.eigencurves.iter().map(|e| e.iter().map(|z| [z.re, z.im]).collect()).collect(),
        },
    };
    let path = cfg.out.join("fit.json");
    write_json(&path, &report)?;
    done(path)
}
