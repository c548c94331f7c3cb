//! MIMIC latent-variable models estimated by covariance-structure maximum
//! likelihood, with two-stage least squares and error-correction variants.

pub mod cli;
pub mod covstruct;
pub mod emimic;
pub mod error;
pub mod estimate;
pub mod evalscore;
pub mod iv2sls;
pub mod linalg;
pub mod mlfit;
pub mod model;
pub mod simharness;

pub use error::{Error, Result};
