use std::time::Instant;

use kpz_core::asymptotic::multitime_cdf;
use kpz_core::exact::multipoint_prob_exact;
use kpz_core::growth::mc_multipoint;
use kpz_core::oracle::{dp_exact_prob_budget, truncated_sum_prob, DEFAULT_STATE_BUDGET};
use kpz_core::tw::{tracy_widom_with, TW_NODES};
use serde::Serialize;
use serde_json::{json, Value};

use crate::checks;
use crate::config::{self, AsymptoticDoc, ExactDoc, ExactInstance, OracleDoc, OracleMethod, SGrid, SimulateDoc, TwDoc};
use crate::error::CliError;
use crate::exec::Rayon;
use crate::output::sha256_hex;

/// Default bound on `|F(s; n) − F(s; 2n)|` for `tw` sweeps.
pub const TW_TOL: f64 = 1e-7;
pub const DEFAULT_CUTOFF: i64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Simulate,
    Oracle,
    Exact,
    Asymptotic,
    Tw { grid: Option<SGrid>, nodes: Option<usize> },
    Validate { only: Vec<u8> },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Oracle => "oracle",
            Task::Exact => "exact",
            Task::Asymptotic => "asymptotic",
            Task::Tw { .. } => "tw",
            Task::Validate { .. } => "validate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    /// Raw instance document.
    pub document: Option<String>,
    pub format: Format,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub imag_part: Option<f64>,
    pub nodes: Option<u64>,
    pub grid: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub subcommand: &'static str,
    pub value: Value,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub instance: Value,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

/// What a run produces; `ok` is false when `validate` saw a failing criterion.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub bytes: Vec<u8>,
    pub ok: bool,
}

fn no_diag(runtime_ms: u64) -> Diagnostics {
    Diagnostics {
        imag_part: None,
        nodes: None,
        grid: Value::Null,
        change: None,
        stderr: None,
        runtime_ms,
    }
}

fn require_doc(cfg: &RunConfig) -> Result<&str, CliError> {
    cfg.document
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{}` needs --config", cfg.task.name())))
}

/// Hash of the effective configuration: subcommand, parsed document in
/// canonical (sorted-key) form, and the flags that change numbers.
fn config_hash(cfg: &RunConfig) -> Result<String, CliError> {
    let doc: Value = match &cfg.document {
        Some(t) => config::parse(t)?,
        None => Value::Null,
    };
    let task = match &cfg.task {
        Task::Tw { grid, nodes } => json!({ "name": "tw", "grid": grid, "nodes": nodes }),
        Task::Validate { only } => json!({ "name": "validate", "only": only }),
        t => json!({ "name": t.name() }),
    };
    let canon = json!({ "task": task, "document": doc, "seed": cfg.seed, "tol": cfg.tol });
    Ok(sha256_hex(&serde_json::to_vec(&canon)?))
}

pub fn run(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let hash = config_hash(cfg)?;
    let csv_ok = matches!(cfg.task, Task::Tw { .. } | Task::Validate { .. });
    if cfg.format == Format::Csv && !csv_ok {
        return Err(CliError::Usage(format!(
            "CSV output is only for sweep tables (tw, validate), not `{}`",
            cfg.task.name()
        )));
    }
    if let Some(t) = cfg.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
    }
    let start = Instant::now();
    let elapsed = |s: Instant| s.elapsed().as_millis() as u64;
    let mut seed = cfg.seed;
    let (value, instance, diagnostics) = match &cfg.task {
        Task::Simulate => {
            let doc: SimulateDoc = config::parse(require_doc(cfg)?)?;
            let params = doc.instance.to_params()?;
            let s = cfg.seed.or(doc.seed).unwrap_or(0);
            seed = Some(s);
            let est = mc_multipoint(&params, doc.samples, s, &Rayon)?;
            let mut d = no_diag(elapsed(start));
            d.nodes = Some(est.samples as u64);
            d.stderr = Some(est.stderr);
            (json!(est.estimate), Value::Null, d)
        }
        Task::Oracle => {
            let doc: OracleDoc = config::parse(require_doc(cfg)?)?;
            let params = doc.instance.to_params()?;
            let mut d = no_diag(0);
            let v = match doc.method {
                OracleMethod::Dp => {
                    let (v, states) = dp_exact_prob_budget(&params, doc.budget.unwrap_or(DEFAULT_STATE_BUDGET))?;
                    d.nodes = Some(states as u64);
                    v
                }
                OracleMethod::Sum => {
                    let cutoff = doc.cutoff.unwrap_or(DEFAULT_CUTOFF);
                    let s = truncated_sum_prob(&params, cutoff)?;
                    d.nodes = Some(s.terms as u64);
                    d.grid = json!({ "cutoff": cutoff });
                    d.change = Some(s.tail);
                    s.value
                }
            };
            d.runtime_ms = elapsed(start);
            (json!(v), Value::Null, d)
        }
        Task::Exact => {
            let doc = ExactDoc::parse(require_doc(cfg)?)?;
            let params = doc.instance.to_params()?;
            let settings = doc.quadrature.settings(cfg.tol);
            let out = multipoint_prob_exact(&params, &settings, &Rayon)?;
            let inst = match doc.instance {
                ExactInstance::Scaled(_) => json!({ "q": params.q, "m": params.m, "n": params.n, "a": params.a }),
                ExactInstance::Discrete(_) => Value::Null,
            };
            let d = Diagnostics {
                imag_part: Some(out.imag_part),
                nodes: Some(out.contour_nodes as u64),
                grid: json!({ "theta_nodes": out.theta_nodes }),
                change: Some(out.change),
                stderr: None,
                runtime_ms: elapsed(start),
            };
            (json!(out.value), inst, d)
        }
        Task::Asymptotic => {
            let doc: AsymptoticDoc = config::parse(require_doc(cfg)?)?;
            let inst = doc.instance.to_instance()?;
            let settings = doc.quadrature.settings(cfg.tol);
            let out = multitime_cdf(&inst, &settings, &Rayon)?;
            let d = Diagnostics {
                imag_part: Some(out.imag_part),
                nodes: Some(out.grid_nodes as u64),
                grid: json!({ "length": out.grid_length, "theta_nodes": out.theta_nodes }),
                change: Some(out.change),
                stderr: None,
                runtime_ms: elapsed(start),
            };
            (json!(out.value), Value::Null, d)
        }
        Task::Tw { grid, nodes } => return tw(cfg, *grid, *nodes, &hash),
        Task::Validate { only } => return validate(cfg, only),
    };
    let report = Report {
        subcommand: cfg.task.name(),
        value,
        instance,
        diagnostics,
        provenance: Provenance {
            config_sha256: hash,
            seed,
            version: env!("CARGO_PKG_VERSION"),
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    Ok(Artifact { bytes, ok: true })
}

/// The default sweep `s = −4, …, 2`.
pub const TW_GRID: SGrid = SGrid {
    from: -4.0,
    to: 2.0,
    step: 1.0,
};

fn tw(cfg: &RunConfig, grid: Option<SGrid>, nodes: Option<usize>, hash: &str) -> Result<Artifact, CliError> {
    let start = Instant::now();
    let doc: TwDoc = match &cfg.document {
        Some(t) => config::parse(t)?,
        None => TwDoc::default(),
    };
    let s = match (grid, &doc.s, doc.grid) {
        (Some(g), _, _) => g.points()?,
        (None, Some(s), _) => s.clone(),
        (None, None, Some(g)) => g.points()?,
        (None, None, None) => TW_GRID.points()?,
    };
    let nodes = nodes.or(doc.nodes).unwrap_or(TW_NODES);
    let tol = cfg.tol.unwrap_or(TW_TOL);
    let rows = tw_rows(&s, nodes)?;
    let change = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    if change > tol {
        return Err(kpz_core::Error::NonConvergence(format!(
            "F_GUE changed by {change:.2e} under node doubling (tolerance {tol:.1e})"
        ))
        .into());
    }
    let bytes = match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["s", "f_gue"])?;
            for (s, f, _) in &rows {
                w.write_record([format!("{s}"), format!("{f:.15e}")])?;
            }
            w.into_inner().map_err(|e| CliError::Io(e.into_error()))?
        }
        Format::Json => {
            let report = Report {
                subcommand: "tw",
                value: rows.iter().map(|(s, f, _)| json!({ "s": s, "f_gue": f })).collect(),
                instance: Value::Null,
                diagnostics: Diagnostics {
                    imag_part: None,
                    nodes: Some(nodes as u64),
                    grid: json!({ "points": s.len() }),
                    change: Some(change),
                    stderr: None,
                    runtime_ms: start.elapsed().as_millis() as u64,
                },
                provenance: Provenance {
                    config_sha256: hash.to_string(),
                    seed: cfg.seed,
                    version: env!("CARGO_PKG_VERSION"),
                },
            };
            let mut b = serde_json::to_vec_pretty(&report)?;
            b.push(b'\n');
            b
        }
    };
    Ok(Artifact { bytes, ok: true })
}

/// `(s, F(s), |F_n(s) − F_2n(s)|)` per point.
fn tw_rows(s: &[f64], nodes: usize) -> Result<Vec<(f64, f64, f64)>, CliError> {
    use rayon::prelude::*;
    s.par_iter()
        .map(|&s| {
            let a = tracy_widom_with(s, nodes)?;
            let b = tracy_widom_with(s, 2 * nodes)?;
            Ok((s, a, (a - b).abs()))
        })
        .collect()
}

fn validate(cfg: &RunConfig, only: &[u8]) -> Result<Artifact, CliError> {
    if let Some(bad) = only.iter().find(|&&i| !(1..=checks::COUNT).contains(&i)) {
        return Err(CliError::Usage(format!(
            "criteria are numbered 1..={}, got {bad}",
            checks::COUNT
        )));
    }
    let ids: Vec<u8> = if only.is_empty() {
        (1..=checks::COUNT).collect()
    } else {
        only.to_vec()
    };
    let results: Vec<checks::Outcome> = ids.iter().map(|&i| checks::run_criterion(i, &Rayon)).collect();
    let ok = results.iter().all(|r| r.pass);
    let bytes = match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "criterion", "status", "detail", "runtime_ms"])?;
            for r in &results {
                w.write_record([
                    r.id.to_string(),
                    r.title.to_string(),
                    r.status().to_string(),
                    r.detail.clone(),
                    r.runtime_ms.to_string(),
                ])?;
            }
            w.into_inner().map_err(|e| CliError::Io(e.into_error()))?
        }
        Format::Json => {
            let passed = results.iter().filter(|r| r.pass).count();
            let v = json!({ "subcommand": "validate", "passed": passed, "total": results.len(), "criteria": results });
            let mut b = serde_json::to_vec_pretty(&v)?;
            b.push(b'\n');
            b
        }
    };
    Ok(Artifact { bytes, ok })
}
