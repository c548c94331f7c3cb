//! Domain types shared by every estimator, plus model-spec validation.

mod dataset;
mod joreskog;
mod params;
mod spec;
mod validate;

pub use dataset::Dataset;
pub use joreskog::{Cell, JoreskogStructure};
pub use params::{EstimationResult, FittedParams, MimicParams, SeMethod};
pub use spec::{Estimator, IntegrationOrder, ModelSpec};
pub use validate::{check_spec, parameter_budget, validate_spec, ValidatedSpec};
