use nalgebra::{DMatrix, DVector};

use super::objective::{expected_hessian, Objective};
use crate::error::{Error, Result};
use crate::model::JoreskogStructure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Gradient ∞-norm threshold.
    pub grad_tol: f64,
    /// Relative objective change threshold.
    pub rel_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-6, rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub structure: JoreskogStructure,
    pub theta: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 60;
const ARMIJO: f64 = 1e-4;

/// Inverse of the expected Hessian at `x`, or the identity when it is not
/// positive definite. The flag tells which one was returned.
fn initial_inverse(obj: &Objective, x: &DVector<f64>) -> (DMatrix<f64>, bool) {
    let n = x.len();
    let fisher = obj
        .template
        .unpack(x)
        .and_then(|s| expected_hessian(&s, obj.cells()))
        .ok()
        .and_then(nalgebra::Cholesky::new)
        .map(|c| c.inverse());
    match fisher {
        Some(h) if h.iter().all(|v| v.is_finite()) => (h, true),
        _ => (DMatrix::identity(n, n), false),
    }
}

/// BFGS with backtracking line search, started from the inverse expected
/// Hessian so badly scaled parameters do not stall it. Trial points where Σ is not positive
/// definite are treated as infinitely bad and the step is halved.
///
/// Running out of iterations is not an error: the best point is returned
/// with `converged = false`.
pub fn minimize(template: &JoreskogStructure, t: &DMatrix<f64>, opts: &MinimizeOptions) -> Result<Minimum> {
    let obj = Objective::new(template, t)?;
    crate::linalg::cholesky(t, "sample covariance")?;
    let n = obj.dim();
    let mut x = template.pack();
    let (mut f, mut g) = obj.value_grad(&x)?;
    if !f.is_finite() {
        return Err(Error::NotPositiveDefinite("Sigma"));
    }
    let (mut h, mut fisher) = initial_inverse(&obj, &x);
    let mut last_rel = f64::INFINITY;
    let mut iterations = 0;
    let mut fresh_h = true;
    // Once the stopping rule is met we keep polishing while BFGS still makes
    // progress; its superlinear tail costs a handful of iterations and buys
    // several digits in the estimates.
    let converged = loop {
        let gn = g.amax();
        let met = gn < opts.grad_tol && last_rel < opts.rel_tol;
        if n == 0 || gn < opts.grad_tol * 1e-3 {
            break true;
        }
        if iterations >= opts.max_iter {
            break met;
        }
        iterations += 1;

        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            (h, fisher) = initial_inverse(&obj, &x);
            fresh_h = true;
            d = -(&h * &g);
            slope = g.dot(&d);
            if slope >= 0.0 {
                h = DMatrix::identity(n, n);
                fisher = false;
                d = -g.clone();
                slope = -g.norm_squared();
            }
        }
        let mut step = if fresh_h && !fisher { (1.0 / d.amax()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        let mut saw_pd = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &x + &d * step;
            if let Ok((ft, gt)) = obj.value_grad(&trial) {
                saw_pd = true;
                if ft.is_finite() && ft <= f + ARMIJO * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if !saw_pd {
                return Err(Error::StepFailure);
            }
            if !fresh_h {
                // Stale curvature; retry once from a fresh start.
                (h, fisher) = initial_inverse(&obj, &x);
                fresh_h = true;
                continue;
            }
            // No decrease representable in floating point: we are at the
            // numerical floor of the objective.
            break met || gn < opts.grad_tol;
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh_h && !fisher {
                // Scale the initial inverse Hessian before the first update.
                h *= sy / y.norm_squared();
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh_h = false;
        }
        last_rel = (f - fnew).abs() / f.abs().max(1.0);
        x = xn;
        f = fnew;
        g = gnew;
    };
    if !converged {
        log::warn!("minimize stopped after {iterations} iterations, |grad| = {:.3e}", g.amax());
    }
    Ok(Minimum {
        structure: template.unpack(&x)?,
        grad_norm: g.amax(),
        theta: x,
        value: f,
        iterations,
        converged,
    })
}
