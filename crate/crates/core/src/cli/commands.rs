use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::parse_model_config;
use super::data::{load_csv, LoadedCsv};
use super::report::{emit_report, read_report, render_text, DataSummary, Estimation, FirstStageRow, IndexRow, Report};
use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::estimate::{fit, integration_orders, prepare, FitOptions, SeRequest};
use crate::evalscore::{build_index, first_stage_proxy, predict_scores};
use crate::model::{check_spec, validate_spec, Estimator, ModelSpec};
use crate::simharness::{run_monte_carlo, ScenarioConfig, DEFAULT_SEED};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  2  parse error (command line, model config, CSV or report file)
  3  validation error (model spec, columns, data contents)
  4  numerical failure (non-convergence, singular or non-PD matrices)
  5  I/O error

Set RUST_LOG (error, warn, info, debug) to control log output.";

#[derive(Debug, Parser)]
#[command(name = "mimic-iv", version, about = "Fit MIMIC latent-variable models and run their simulation studies")]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Run a Monte Carlo scenario.
    Simulate(SimulateArgs),
    /// Fit a static model and build a 0-1 group index from latent scores.
    Score(ScoreArgs),
    /// Print a saved report as text.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SeChoice {
    Auto,
    Sandwich,
    Bootstrap,
    None,
}

impl SeChoice {
    fn request(self) -> SeRequest {
        match self {
            SeChoice::Auto => SeRequest::Auto,
            SeChoice::Sandwich => SeRequest::Sandwich,
            SeChoice::Bootstrap => SeRequest::Bootstrap,
            SeChoice::None => SeRequest::None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SeChoice::Auto => "auto",
            SeChoice::Sandwich => "sandwich",
            SeChoice::Bootstrap => "bootstrap",
            SeChoice::None => "none",
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Overrides the estimator named in the model file.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Panel unit id column; rows of a unit must be contiguous and in time order.
    #[arg(long)]
    pub unit: Option<String>,
    #[arg(long, value_enum, default_value_t = SeChoice::Auto)]
    pub se: SeChoice,
    #[arg(long, default_value_t = 200)]
    pub resamples: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub scenario: u8,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated list of unit counts, e.g. "50,100,500".
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Column holding the group label.
    #[arg(long)]
    pub group: String,
    /// Predictors of a first-stage regression that replaces each endogenous
    /// cause by its fitted values before a plain MIMIC fit.
    #[arg(long = "first-stage")]
    pub first_stage: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::MalformedCsv(_) | Error::NonNumericCell { .. } | Error::Json(_) => 2,
        Error::UnknownColumn(_)
        | Error::Underidentified(_)
        | Error::EndogenousWithoutIv(_)
        | Error::Invalid(_)
        | Error::EmptyAfterFiltering
        | Error::InvalidData(_)
        | Error::DimensionMismatch(_)
        | Error::SingleGroup
        | Error::SeriesTooShort { .. }
        | Error::ConstantSeries(_) => 3,
        Error::NotPositiveDefinite(_)
        | Error::RankDeficient(_)
        | Error::StepFailure
        | Error::NonConvergence(_)
        | Error::ComplexEigenvalue(_)
        | Error::SingularHessian
        | Error::ZeroDf
        | Error::TooFewConverged { .. } => 4,
        Error::Io(_) => 5,
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} is not a readable file", path.display()))))
    }
}

fn require_out_dir(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() && !d.is_dir() => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", d.display()),
        ))),
        _ => Ok(()),
    }
}

fn read_model(path: &Path) -> Result<ModelSpec> {
    parse_model_config(&std::fs::read_to_string(path)?)
}

fn checked(spec: ModelSpec) -> Result<ModelSpec> {
    let d = check_spec(&spec);
    if d.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Invalid(d))
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

fn summary(path: &Path, l: &LoadedCsv) -> DataSummary {
    DataSummary {
        path: path.display().to_string(),
        rows_read: l.rows_read,
        rows_dropped: l.rows_dropped,
        rows_used: l.data.nrows(),
    }
}

fn echo(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn finish(report: &Report, out: &Path) -> Result<i32> {
    let txt = emit_report(report, out)?;
    log::info!("wrote {} and {}", out.display(), txt.display());
    match &report.estimation {
        Some(e) if !e.converged => {
            log::warn!("the optimizer did not converge; estimates in the report are provisional");
            Ok(4)
        }
        _ => Ok(0),
    }
}

pub fn run_fit(a: &FitArgs) -> Result<i32> {
    require_file(&a.data)?;
    require_file(&a.model)?;
    require_out_dir(&a.out)?;
    let mut spec = read_model(&a.model)?;
    if let Some(e) = &a.estimator {
        let est: Estimator = e.parse().map_err(|m: String| Error::Parse { line: 1, column: 1, message: format!("--estimator: {m}") })?;
        spec = checked(spec.with_estimator(est))?;
    }
    let loaded = load_csv(&a.data, &spec.referenced_columns(), &[], a.unit.as_deref())?;
    validate_spec(&spec, &loaded.data)?;
    let opts = FitOptions { std_errors: a.se.request(), resamples: a.resamples, seed: a.seed, ..FitOptions::default() };
    let result = fit(&loaded.data, &spec, &opts)?;
    let integration = if spec.estimator.is_error_correction() {
        integration_orders(&prepare(&loaded.data, &spec)?)
    } else {
        Vec::new()
    };
    let config = echo(&[
        ("data", a.data.display().to_string()),
        ("model", a.model.display().to_string()),
        ("out", a.out.display().to_string()),
        ("estimator", spec.estimator.to_string()),
        ("se", a.se.as_str().to_string()),
        ("resamples", a.resamples.to_string()),
        ("unit", a.unit.clone().unwrap_or_default()),
    ]);
    let mut report = Report::new("fit", config, a.seed);
    report.data = Some(summary(&a.data, &loaded));
    report.estimation = Some(Estimation::from_result(&result, integration));
    report.model = Some(spec);
    finish(&report, &a.out)
}

pub fn run_simulate(a: &SimulateArgs) -> Result<i32> {
    require_out_dir(&a.out)?;
    let mut config = ScenarioConfig::scenario(a.scenario)?;
    config.seed = a.seed;
    if let Some(r) = a.reps {
        config.replications = r;
    }
    if let Some(g) = &a.grid {
        config.n_grid = split_list(g)
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| Error::InvalidData(format!("--grid: `{s}` is not a unit count"))))
            .collect::<Result<_>>()?;
    }
    config.validate()?;
    let sim = run_monte_carlo(&config)?;
    log::info!("simulation finished in {:.1} s", sim.runtime_secs);
    let cfg = echo(&[
        ("scenario", a.scenario.to_string()),
        ("reps", config.replications.to_string()),
        ("grid", config.n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")),
        ("out", a.out.display().to_string()),
    ]);
    let mut report = Report::new("simulate", cfg, a.seed);
    report.simulation = Some(sim);
    finish(&report, &a.out)
}

pub fn run_score(a: &ScoreArgs) -> Result<i32> {
    require_file(&a.data)?;
    require_file(&a.model)?;
    require_out_dir(&a.out)?;
    let mut spec = read_model(&a.model)?;
    if !matches!(spec.estimator, Estimator::Mimic | Estimator::TslsMimic) {
        return Err(Error::Invalid(vec![Diagnostic::new(
            DiagnosticKind::InvalidSpec,
            format!("score needs a static estimator (MIMIC or TSLS_MIMIC), got {}", spec.estimator),
        )]));
    }
    let predictors = a.first_stage.as_deref().map(split_list).unwrap_or_default();
    if a.first_stage.is_some() && (predictors.is_empty() || spec.endogenous_causes.is_empty()) {
        return Err(Error::InvalidData("--first-stage needs predictors and an endogenous cause in the model".into()));
    }
    let mut columns = spec.referenced_columns();
    columns.extend(predictors.iter().cloned());
    let loaded = load_csv(&a.data, &columns, std::slice::from_ref(&a.group), None)?;
    validate_spec(&spec, &loaded.data)?;
    let mut data = loaded.data.clone();
    let mut first_stage = Vec::new();
    if !predictors.is_empty() {
        for e in &spec.endogenous_causes {
            let fs = first_stage_proxy(&data, e, &predictors)?;
            data = data.with_column(e, &fs.fitted)?;
            first_stage.push(FirstStageRow { endogenous: e.clone(), predictors: predictors.clone(), r2: fs.r2 });
        }
        spec.endogenous_causes.clear();
        spec.instruments.clear();
        spec.estimator = Estimator::Mimic;
    }
    let result = fit(&data, &spec, &FitOptions { seed: a.seed, ..FitOptions::default() })?;
    let params = result.mimic().ok_or_else(|| Error::InvalidData("score needs MIMIC parameters".into()))?;
    let scores = predict_scores(params, &data.select(&spec.causes)?, &data.select(&spec.indicators)?)?;
    let groups = &loaded.text[&a.group];
    let index = build_index(&scores, groups)?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in groups {
        *counts.entry(g.as_str()).or_insert(0) += 1;
    }
    let cfg = echo(&[
        ("data", a.data.display().to_string()),
        ("model", a.model.display().to_string()),
        ("group", a.group.clone()),
        ("first_stage", predictors.join(",")),
        ("out", a.out.display().to_string()),
    ]);
    let mut report = Report::new("score", cfg, a.seed);
    report.data = Some(summary(&a.data, &loaded));
    report.first_stage = first_stage;
    report.estimation = Some(Estimation::from_result(&result, Vec::new()));
    report.index = index
        .into_iter()
        .map(|(g, v)| IndexRow { units: counts[g.as_str()], group: g, index: v })
        .collect();
    report.model = Some(spec);
    finish(&report, &a.out)
}

pub fn run_report(a: &ReportArgs) -> Result<i32> {
    require_file(&a.input)?;
    print!("{}", render_text(&read_report(&a.input)?));
    Ok(0)
}

/// Runs one subcommand and returns its exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Score(a) => run_score(a),
        Command::Report(a) => run_report(a),
    }
}
