use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evalscore::FitReport;
use crate::model::{EstimationResult, IntegrationOrder, ModelSpec, SeMethod};
use crate::simharness::SimulationReport;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub path: String,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub rows_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub label: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub method: Option<SeMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimation {
    pub estimator: String,
    pub observed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub integration: Vec<(String, IntegrationOrder)>,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub parameters: Vec<ParamRow>,
    /// Absent when the model has zero degrees of freedom.
    pub fit: Option<FitReport>,
}

impl Estimation {
    pub fn from_result(r: &EstimationResult, integration: Vec<(String, IntegrationOrder)>) -> Self {
        let parameters = r
            .labels
            .iter()
            .enumerate()
            .map(|(i, label)| ParamRow {
                label: label.clone(),
                estimate: r.estimates[i],
                std_error: r.std_errors.as_ref().map(|s| s[i]),
                method: r.se_method,
            })
            .collect();
        Self {
            estimator: r.estimator.to_string(),
            observed: r.observed.clone(),
            integration,
            n_obs: r.n_obs,
            converged: r.converged,
            iterations: r.iterations,
            objective: r.objective_value,
            parameters,
            fit: r.fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageRow {
    pub endogenous: String,
    pub predictors: Vec<String>,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub group: String,
    pub units: usize,
    pub index: f64,
}

/// Everything a run produced, in one self-describing document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-line settings as given, after defaults are applied.
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub first_stage: Vec<FirstStageRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<Estimation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub index: Vec<IndexRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
}

impl Report {
    pub fn new(command: &str, config: BTreeMap<String, String>, seed: u64) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config,
            seed,
            model: None,
            data: None,
            first_stage: Vec::new(),
            estimation: None,
            index: Vec::new(),
            simulation: None,
        }
    }
}

/// Path of the plain-text rendering written next to a report.
pub fn text_path(path: &Path) -> PathBuf {
    let p = path.with_extension("txt");
    if p == path {
        let mut s = path.as_os_str().to_owned();
        s.push(".txt");
        PathBuf::from(s)
    } else {
        p
    }
}

/// Writes the JSON report to `path` and its text rendering next to it.
pub fn emit_report(report: &Report, path: &Path) -> Result<PathBuf> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(path, json)?;
    let txt = text_path(path);
    std::fs::write(&txt, render_text(report))?;
    Ok(txt)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Human-readable tables. Deterministic for a given report.
pub fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", r.tool, r.version, r.command);
    let _ = writeln!(s, "seed: {}", r.seed);
    for (k, v) in &r.config {
        let _ = writeln!(s, "  {k}: {v}");
    }
    if let Some(m) = &r.model {
        let _ = writeln!(s, "\nmodel: {}", m.estimator);
        let _ = writeln!(s, "  indicators: {}", m.indicators.join(", "));
        let _ = writeln!(s, "  causes: {}", m.causes.join(", "));
        if !m.instruments.is_empty() {
            let _ = writeln!(s, "  instruments: {}", m.instruments.join(", "));
        }
        if !m.endogenous_causes.is_empty() {
            let _ = writeln!(s, "  endogenous: {}", m.endogenous_causes.join(", "));
        }
    }
    if let Some(d) = &r.data {
        let _ = writeln!(s, "\ndata: {} ({} rows read, {} dropped, {} used)", d.path, d.rows_read, d.rows_dropped, d.rows_used);
    }
    for f in &r.first_stage {
        let _ = writeln!(s, "\nfirst stage: {} on {} (R² = {:.4})", f.endogenous, f.predictors.join(", "), f.r2);
    }
    if let Some(e) = &r.estimation {
        let _ = writeln!(s, "\nestimator: {}  N = {}  converged: {}  iterations: {}", e.estimator, e.n_obs, e.converged, e.iterations);
        for (label, order) in &e.integration {
            let _ = writeln!(s, "  {label}: {order:?}");
        }
        let width = e.parameters.iter().map(|p| p.label.len()).max().unwrap_or(9).max(9);
        let _ = writeln!(s, "\n{:<width$}  {:>12}  {:>12}  method", "parameter", "estimate", "std. error");
        for p in &e.parameters {
            let se = p.std_error.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
            let method = match p.method {
                Some(SeMethod::Sandwich) => "sandwich",
                Some(SeMethod::Bootstrap) => "bootstrap",
                None => "-",
            };
            let _ = writeln!(s, "{:<width$}  {:>12.6}  {:>12}  {method}", p.label, p.estimate, se);
        }
        match &e.fit {
            Some(f) => {
                let _ = writeln!(
                    s,
                    "\nchi2 = {:.4}  df = {}  RMSEA = {:.4}  SRMR = {:.4}  CFI = {:.4}",
                    f.chi2, f.df, f.rmsea, f.srmr, f.cfi
                );
            }
            None => {
                let _ = writeln!(s, "\nfit indices: not defined (zero degrees of freedom)");
            }
        }
    }
    if !r.index.is_empty() {
        let _ = writeln!(s, "\n{:<12}  {:>6}  {:>8}", "group", "units", "index");
        for row in &r.index {
            let _ = writeln!(s, "{:<12}  {:>6}  {:>8.4}", row.group, row.units, row.index);
        }
    }
    if let Some(sim) = &r.simulation {
        let c = &sim.config;
        let _ = writeln!(s, "\nscenario {}: t = {}, I(1) causes = {}, replications = {}", c.scenario, c.t, c.n_i1, c.replications);
        let _ = writeln!(
            s,
            "{:>6}  {:<12}  {:>9}  {:>8}  {:>8}  {:>8}  {:>10}",
            "N", "estimator", "converged", "RMSEA", "SRMR", "CFI", "coef error"
        );
        for cell in &sim.cells {
            let _ = writeln!(
                s,
                "{:>6}  {:<12}  {:>5}/{:<3}  {:>8}  {:>8}  {:>8}  {:>10}",
                cell.n,
                cell.estimator.to_string(),
                cell.converged,
                cell.replications,
                opt(cell.median_rmsea),
                opt(cell.median_srmr),
                opt(cell.median_cfi),
                opt(cell.median_coef_error)
            );
            for (kind, count) in &cell.failures {
                let _ = writeln!(s, "{:>6}  {:<12}  {count} failed: {kind}", "", "");
            }
        }
    }
    s
}
