//! Simulated scenarios, the Monte Carlo comparison of the five estimators,
//! and bootstrap standard errors.

mod bootstrap;
mod dgp;
mod montecarlo;

pub use bootstrap::{bootstrap_se, BootstrapSe, MIN_RESAMPLES};
pub use dgp::{scaled_alpha1, simulate_panel, simulate_static, unit_rng, DgpParams, CAUSES, INDICATORS, INSTRUMENTS};
pub use montecarlo::{
    generate_scenario, run_monte_carlo, scaled_cause1, CellSummary, ScenarioConfig, SimulationReport, DEFAULT_SEED,
};
