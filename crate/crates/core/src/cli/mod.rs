//! Command-line front end: config grammar, CSV ingestion, reports and the
//! subcommands that tie them to the estimators.

pub mod commands;
pub mod config;
pub mod data;
pub mod fixture;
pub mod report;

pub use commands::{exit_code, run, Cli, Command};
pub use config::parse_model_config;
pub use data::{load_csv, parse_csv, LoadedCsv};
pub use report::{emit_report, read_report, render_text, Report};
