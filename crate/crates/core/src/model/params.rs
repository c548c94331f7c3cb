use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covstruct::EmimicParams;
use crate::error::{Error, Result};
use crate::evalscore::FitReport;
use crate::linalg;
use crate::model::{Estimator, JoreskogStructure};

/// Parameters of the single-latent MIMIC model
/// y* = α'x + ε, y = βy* + u, Var(ε) = σ², Cov(u) = Θ².
#[derive(Debug, Clone, PartialEq)]
pub struct MimicParams {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    /// Indicator error standard deviations (diagonal of Θ).
    pub theta_diag: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub sigma2: f64,
}

impl MimicParams {
    /// Builds and checks the invariants: Θ strictly positive, Φ symmetric PD.
    pub fn new(
        alpha: DVector<f64>,
        beta: DVector<f64>,
        theta_diag: DVector<f64>,
        phi: DMatrix<f64>,
    ) -> Result<Self> {
        let p = Self { alpha, beta, theta_diag, phi, sigma2: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.alpha.len();
        let m = self.beta.len();
        if self.phi.shape() != (q, q) {
            return Err(Error::DimensionMismatch(format!("Phi must be {q}x{q}")));
        }
        if self.theta_diag.len() != m {
            return Err(Error::DimensionMismatch(format!("Theta must have {m} entries")));
        }
        if self.theta_diag.iter().any(|&t| t <= 0.0) {
            return Err(Error::InvalidData("Theta entries must be positive".into()));
        }
        if linalg::max_abs_diff(&self.phi, &self.phi.transpose()) > 0.0 {
            return Err(Error::NotPositiveDefinite("Phi"));
        }
        linalg::cholesky(&self.phi, "Phi")?;
        Ok(())
    }

    pub fn n_causes(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.beta.len()
    }

    /// ρ² = α'Φα, the explained latent variance.
    pub fn rho2(&self) -> f64 {
        (self.alpha.transpose() * &self.phi * &self.alpha)[0]
    }

    /// π² = β'Θ⁻²β.
    pub fn pi2(&self) -> f64 {
        self.beta.iter().zip(self.theta_diag.iter()).map(|(b, t)| b * b / (t * t)).sum::<f64>()
            * self.sigma2
    }

    /// κ² = β'Ω⁻¹β = π²/(1+π²).
    pub fn kappa2(&self) -> f64 {
        let pi2 = self.pi2();
        pi2 / (1.0 + pi2)
    }

    /// Same model expressed with the loading of `indicator` fixed at 1 and
    /// the latent disturbance variance free. Π = αβ' and Σ are unchanged.
    pub fn rescaled_to_indicator(&self, indicator: usize) -> Self {
        let s = self.beta[indicator];
        Self {
            alpha: &self.alpha * s,
            beta: &self.beta / s,
            theta_diag: self.theta_diag.clone(),
            phi: self.phi.clone(),
            sigma2: self.sigma2 * s * s,
        }
    }
}

/// Model-specific view of the fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedParams {
    Mimic(MimicParams),
    Emimic(EmimicParams),
    /// A structure that is not one of the named model families.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMethod {
    Sandwich,
    Bootstrap,
}

/// Output of a covariance-structure fit.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub estimator: Estimator,
    /// Observed variable labels, in Σ order.
    pub observed: Vec<String>,
    pub structure: JoreskogStructure,
    pub params: FittedParams,
    /// Free-parameter labels, in packing order.
    pub labels: Vec<String>,
    pub estimates: DVector<f64>,
    pub std_errors: Option<DVector<f64>>,
    pub se_method: Option<SeMethod>,
    pub implied_sigma: DMatrix<f64>,
    pub sample_cov: DMatrix<f64>,
    pub n_obs: usize,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub fit: Option<FitReport>,
}

impl EstimationResult {
    pub fn mimic(&self) -> Option<&MimicParams> {
        match &self.params {
            FittedParams::Mimic(p) => Some(p),
            _ => None,
        }
    }

    pub fn emimic(&self) -> Option<&EmimicParams> {
        match &self.params {
            FittedParams::Emimic(p) => Some(p),
            _ => None,
        }
    }

    pub fn free_count(&self) -> usize {
        self.estimates.len()
    }
}
