use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{scaled_alpha1, simulate_panel, simulate_static, DgpParams, CAUSES, INDICATORS, INSTRUMENTS};
use crate::error::{Error, Result};
use crate::estimate::{fit_prepared, prepare};
use crate::mlfit::MinimizeOptions;
use crate::model::{Dataset, Estimator, EstimationResult, FittedParams, IntegrationOrder, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// 1–3 for the panel scenarios; 0 for the cross-sectional design.
    pub scenario: u8,
    /// Periods per unit (1 for the cross-section).
    pub t: usize,
    pub n_i1: usize,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub resamples: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub dgp: DgpParams,
}

pub const DEFAULT_SEED: u64 = 20_240_917;

impl ScenarioConfig {
    /// Desk-scale defaults for scenario 1 (t = 20, one I(1) cause),
    /// 2 (t = 20, three I(1) causes) or 3 (t = 100, three I(1) causes).
    pub fn scenario(id: u8) -> Result<Self> {
        let (t, n_i1) = match id {
            1 => (20, 1),
            2 => (20, 3),
            3 => (100, 3),
            _ => return Err(Error::InvalidData(format!("unknown scenario {id}; expected 1, 2 or 3"))),
        };
        Ok(Self {
            scenario: id,
            t,
            n_i1,
            n_grid: vec![50, 100, 500, 2000],
            replications: 100,
            resamples: 200,
            seed: DEFAULT_SEED,
            estimators: Estimator::ALL.to_vec(),
            dgp: DgpParams::default(),
        })
    }

    /// Cross-sectional endogenous design; only the static estimators apply.
    pub fn cross_section() -> Self {
        Self {
            scenario: 0,
            t: 1,
            n_i1: 0,
            n_grid: vec![500, 2000, 5000],
            replications: 100,
            resamples: 200,
            seed: DEFAULT_SEED,
            estimators: vec![Estimator::Mimic, Estimator::TslsMimic],
            dgp: DgpParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidData(m));
        if self.scenario > 3 {
            return bad(format!("unknown scenario {}", self.scenario));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("N grid must be non-empty and positive".into());
        }
        if self.replications == 0 || self.estimators.is_empty() {
            return bad("need at least one replication and one estimator".into());
        }
        if self.n_i1 > CAUSES.len() {
            return bad(format!("at most {} I(1) causes", CAUSES.len()));
        }
        if self.scenario == 0 {
            if self.t != 1 {
                return bad("the cross-sectional design has t = 1".into());
            }
            if let Some(e) = self.estimators.iter().find(|e| !matches!(e, Estimator::Mimic | Estimator::TslsMimic)) {
                return bad(format!("{e} needs time series"));
            }
        } else if self.t < 10 {
            return bad(format!("t = {} is too short for the dynamic estimators", self.t));
        }
        Ok(())
    }

    /// Model fitted by `estimator`; integration orders are pinned to the
    /// known design.
    pub fn spec(&self, estimator: Estimator) -> ModelSpec {
        let mut s = ModelSpec::new(INDICATORS, CAUSES, estimator);
        if estimator.is_two_stage() {
            s = s.with_endogenous(["x1"]).with_instruments(INSTRUMENTS);
        }
        if self.scenario != 0 {
            for (j, c) in CAUSES.iter().enumerate() {
                let order = if j < self.n_i1 { IntegrationOrder::I1 } else { IntegrationOrder::I0 };
                s = s.with_integration(c, order);
            }
        }
        s
    }
}

/// One simulated dataset of `n` units for `config`.
pub fn generate_scenario(config: &ScenarioConfig, n: usize, seed: u64) -> Result<Dataset> {
    generate(config, n, seed, 0)
}

fn generate(config: &ScenarioConfig, n: usize, seed: u64, replication: u64) -> Result<Dataset> {
    if config.scenario == 0 {
        simulate_static(&config.dgp, n, seed, replication)
    } else {
        simulate_panel(&config.dgp, config.n_i1, config.t, n, seed, replication)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub estimator: Estimator,
    pub replications: usize,
    pub converged: usize,
    pub not_converged: usize,
    /// Failed fits by error kind.
    pub failures: BTreeMap<String, usize>,
    pub median_rmsea: Option<f64>,
    pub median_srmr: Option<f64>,
    pub median_cfi: Option<f64>,
    /// Median signed error of the cause-1 coefficient, first loading fixed at 1.
    pub median_coef_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ScenarioConfig,
    pub cells: Vec<CellSummary>,
    /// Wall-clock seconds; kept out of the serialized report so identical
    /// runs produce identical files.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl SimulationReport {
    pub fn cell(&self, n: usize, estimator: Estimator) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.n == n && c.estimator == estimator)
    }
}

#[derive(Debug, Clone)]
enum Outcome {
    Converged { rmsea: f64, srmr: f64, cfi: f64, coef_error: f64 },
    NotConverged,
    Failed(String),
}

fn error_kind(e: &Error) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// Coefficient of cause 1 times the first loading.
pub fn scaled_cause1(result: &EstimationResult) -> Option<f64> {
    match &result.params {
        FittedParams::Mimic(p) => Some(p.alpha[0] * p.beta[0]),
        FittedParams::Emimic(p) if p.n_i1() > 0 => Some(p.alpha_delta[0] * p.lambda[0]),
        FittedParams::Emimic(p) => Some(p.beta_delta[0] * p.lambda[0]),
        FittedParams::Generic => None,
    }
}

fn run_one(data: &Dataset, spec: &ModelSpec, truth: f64, opts: &MinimizeOptions) -> Outcome {
    let fitted = prepare(data, spec).and_then(|p| fit_prepared(&p, spec.estimator, opts));
    match fitted {
        Err(e) => Outcome::Failed(error_kind(&e)),
        Ok(r) if !r.converged => Outcome::NotConverged,
        Ok(r) => match (&r.fit, scaled_cause1(&r)) {
            (Some(f), Some(c)) => Outcome::Converged { rmsea: f.rmsea, srmr: f.srmr, cfi: f.cfi, coef_error: c - truth },
            _ => Outcome::Failed("ZeroDf".into()),
        },
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn summarize(n: usize, estimator: Estimator, outcomes: &[Outcome]) -> CellSummary {
    let mut failures = BTreeMap::new();
    let mut not_converged = 0;
    let mut ok = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Converged { rmsea, srmr, cfi, coef_error } => ok.push((*rmsea, *srmr, *cfi, *coef_error)),
            Outcome::NotConverged => not_converged += 1,
            Outcome::Failed(k) => *failures.entry(k.clone()).or_insert(0) += 1,
        }
    }
    let enough = 2 * ok.len() >= outcomes.len() && !ok.is_empty();
    let pick = |f: fn(&(f64, f64, f64, f64)) -> f64| if enough { median(ok.iter().map(f).collect()) } else { None };
    CellSummary {
        n,
        estimator,
        replications: outcomes.len(),
        converged: ok.len(),
        not_converged,
        failures,
        median_rmsea: pick(|o| o.0),
        median_srmr: pick(|o| o.1),
        median_cfi: pick(|o| o.2),
        median_coef_error: pick(|o| o.3),
    }
}

/// Fits every estimator to every replication at every N and reports median
/// fit indices per cell. Replications run in parallel on independent
/// streams; the report does not depend on scheduling.
pub fn run_monte_carlo(config: &ScenarioConfig) -> Result<SimulationReport> {
    config.validate()?;
    let start = Instant::now();
    let opts = MinimizeOptions::default();
    let truth = scaled_alpha1(&config.dgp);
    let n_max = *config.n_grid.iter().max().expect("validated grid");
    let specs: Vec<ModelSpec> = config.estimators.iter().map(|&e| config.spec(e)).collect();
    let per_rep: Vec<Vec<Outcome>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let full = generate(config, n_max, config.seed, rep as u64);
            let mut out = Vec::with_capacity(config.n_grid.len() * specs.len());
            for &n in &config.n_grid {
                let data = full.as_ref().map_err(error_kind).and_then(|d| prefix_units(d, n, config.t).map_err(|e| error_kind(&e)));
                for spec in &specs {
                    out.push(match &data {
                        Ok(d) => run_one(d, spec, truth, &opts),
                        Err(k) => Outcome::Failed(k.clone()),
                    });
                }
            }
            out
        })
        .collect();
    let mut cells = Vec::new();
    for (gi, &n) in config.n_grid.iter().enumerate() {
        for (ei, &est) in config.estimators.iter().enumerate() {
            let idx = gi * specs.len() + ei;
            let outcomes: Vec<Outcome> = per_rep.iter().map(|r| r[idx].clone()).collect();
            let cell = summarize(n, est, &outcomes);
            for (kind, count) in &cell.failures {
                log::warn!("N = {n}, {est}: {count} fit(s) failed with {kind}");
            }
            cells.push(cell);
        }
    }
    Ok(SimulationReport { config: config.clone(), cells, runtime_secs: start.elapsed().as_secs_f64() })
}

/// First `n` units (rows for a cross-section) of a larger simulated dataset.
fn prefix_units(data: &Dataset, n: usize, t: usize) -> Result<Dataset> {
    let rows: Vec<usize> = (0..n * t).collect();
    data.take_rows(&rows, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut c = ScenarioConfig::scenario(1).unwrap();
        c.n_grid = vec![50, 100];
        c.replications = 4;
        c
    }

    #[test]
    fn report_is_reproducible_and_complete() {
        let c = small();
        let a = run_monte_carlo(&c).unwrap();
        let b = run_monte_carlo(&c).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.cells.len(), 2 * Estimator::ALL.len());
        for cell in &a.cells {
            let failed: usize = cell.failures.values().sum();
            assert_eq!(cell.converged + cell.not_converged + failed, 4);
        }
        assert!(a.cell(100, Estimator::TslsEmimic).is_some());
    }

    #[test]
    fn scenario_constants() {
        let t: Vec<(usize, usize)> =
            (1..=3).map(|i| ScenarioConfig::scenario(i).unwrap()).map(|c| (c.t, c.n_i1)).collect();
        assert_eq!(t, vec![(20, 1), (20, 3), (100, 3)]);
        assert!(ScenarioConfig::scenario(4).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small();
        c.n_grid.clear();
        assert!(run_monte_carlo(&c).is_err());
        let mut x = ScenarioConfig::cross_section();
        x.estimators.push(Estimator::Emimic);
        assert!(x.validate().is_err());
        let mut z = small();
        z.replications = 0;
        assert!(z.validate().is_err());
    }

    #[test]
    fn generated_scenario_matches_seed() {
        let c = small();
        let a = generate_scenario(&c, 30, 99).unwrap();
        assert_eq!(a, generate_scenario(&c, 30, 99).unwrap());
        assert_eq!(a.nrows(), 30 * c.t);
        assert_eq!(a.unit_ranges().len(), 30);
    }

    #[test]
    fn medians_need_half_the_replications() {
        let ok = Outcome::Converged { rmsea: 0.1, srmr: 0.1, cfi: 0.9, coef_error: 0.0 };
        let half = summarize(10, Estimator::Mimic, &[ok.clone(), Outcome::NotConverged]);
        assert_eq!(half.median_rmsea, Some(0.1));
        let few = summarize(10, Estimator::Mimic, &[ok, Outcome::NotConverged, Outcome::Failed("StepFailure".into())]);
        assert_eq!(few.median_rmsea, None);
        assert_eq!(few.failures.get("StepFailure"), Some(&1));
    }
}
