//! Maximum-likelihood fitting of covariance structures.

mod implicit;
mod objective;
mod optimize;
mod sandwich;

pub use implicit::{implicit_ml_iteration, ImplicitFit, SweepInfo};
pub use objective::{discrepancy, expected_hessian, value_grad_at, Objective};
pub use optimize::{minimize, MinimizeOptions, Minimum};
pub use sandwich::{moment_gamma, numerical_hessian, sandwich_covariance, MomentBlocks, Sandwich};
