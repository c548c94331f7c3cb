use std::collections::HashSet;

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::model::{Dataset, Estimator, ModelSpec};

/// A spec whose labels have been resolved against a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSpec {
    pub spec: ModelSpec,
    pub indicator_cols: Vec<usize>,
    pub cause_cols: Vec<usize>,
    pub instrument_cols: Vec<usize>,
    /// Position of the scaling indicator within `indicators`.
    pub scaling_pos: usize,
    pub free_params: usize,
    pub moments: usize,
}

/// Free parameters of the template the estimator lowers to, and the number
/// of distinct observed moments.
pub fn parameter_budget(estimator: Estimator, p: usize, q: usize) -> (usize, usize) {
    if estimator.is_error_correction() {
        // observed: (Δx, v) [q], z_{t-1} [p], Δy [p]
        let free = q * (q + 1) / 2 + p * (p + 1) / 2 + q + p + p + p;
        let k = q + 2 * p;
        (free, k * (k + 1) / 2)
    } else {
        let free = q * (q + 1) / 2 + q + p + p;
        let k = p + q;
        (free, k * (k + 1) / 2)
    }
}

fn duplicates(labels: &[String]) -> Vec<&String> {
    let mut seen = HashSet::new();
    labels.iter().filter(|l| !seen.insert(l.as_str())).collect()
}

/// Data-independent checks. Every problem is reported, not just the first.
pub fn check_spec(spec: &ModelSpec) -> Vec<Diagnostic> {
    use DiagnosticKind::*;
    let mut out = Vec::new();
    let p = spec.indicators.len();
    let q = spec.causes.len();
    if p < 2 {
        out.push(Diagnostic::new(InvalidSpec, format!("need at least 2 indicators, got {p}")));
    }
    if q < 1 {
        out.push(Diagnostic::new(InvalidSpec, "need at least 1 cause"));
    }
    for (section, labels) in
        [("indicators", &spec.indicators), ("causes", &spec.causes), ("instruments", &spec.instruments)]
    {
        for d in duplicates(labels) {
            out.push(Diagnostic::new(DuplicateLabel, format!("`{d}` listed twice in [{section}]")));
        }
    }
    for c in &spec.causes {
        if spec.indicators.contains(c) && !spec.is_endogenous(c) {
            out.push(Diagnostic::new(
                DuplicateLabel,
                format!("`{c}` is both indicator and cause but not flagged endogenous"),
            ));
        }
    }
    for e in &spec.endogenous_causes {
        if !spec.causes.contains(e) {
            out.push(Diagnostic::new(InvalidSpec, format!("endogenous `{e}` is not a cause")));
        }
    }
    if !spec.endogenous_causes.is_empty() && !spec.estimator.is_two_stage() {
        for e in &spec.endogenous_causes {
            out.push(Diagnostic::new(
                EndogenousWithoutIv,
                format!("`{e}` is endogenous but estimator {} does not instrument", spec.estimator),
            ));
        }
    }
    for w in &spec.instruments {
        if spec.indicators.contains(w) {
            out.push(Diagnostic::new(InvalidSpec, format!("instrument `{w}` is also an indicator")));
        }
        if spec.causes.contains(w) {
            out.push(Diagnostic::new(InvalidSpec, format!("instrument `{w}` is also a cause")));
        }
    }
    if let Some(s) = &spec.scaling_indicator {
        if !spec.indicators.contains(s) {
            out.push(Diagnostic::new(InvalidSpec, format!("scaling indicator `{s}` is not an indicator")));
        }
    }
    for label in spec.integration_order.keys() {
        if !spec.causes.contains(label) {
            out.push(Diagnostic::new(InvalidSpec, format!("integration order given for non-cause `{label}`")));
        }
    }
    if spec.instruments.len() < spec.endogenous_causes.len() {
        out.push(Diagnostic::new(
            Underidentified,
            format!(
                "order condition fails: {} instrument(s) for {} endogenous cause(s)",
                spec.instruments.len(),
                spec.endogenous_causes.len()
            ),
        ));
    }
    if p >= 1 && q >= 1 {
        let (free, moments) = parameter_budget(spec.estimator, p, q);
        if free > moments {
            out.push(Diagnostic::new(
                Underidentified,
                format!("t-rule fails: {free} free parameters for {moments} moments"),
            ));
        }
    }
    out
}

/// Resolves labels against `data` and runs every identification check.
pub fn validate_spec(spec: &ModelSpec, data: &Dataset) -> Result<ValidatedSpec> {
    let mut diags = check_spec(spec);
    let mut resolve = |labels: &[String]| -> Vec<usize> {
        labels
            .iter()
            .filter_map(|l| {
                let idx = data.column_index(l);
                if idx.is_none() {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::UnknownColumn,
                        format!("column `{l}` not found in data"),
                    ));
                }
                idx
            })
            .collect()
    };
    let indicator_cols = resolve(&spec.indicators);
    let cause_cols = resolve(&spec.causes);
    let instrument_cols = resolve(&spec.instruments);
    if !diags.is_empty() {
        return Err(match diags.as_slice() {
            [d] if d.kind == DiagnosticKind::UnknownColumn => Error::UnknownColumn(d.message.clone()),
            [d] if d.kind == DiagnosticKind::Underidentified => Error::Underidentified(d.message.clone()),
            [d] if d.kind == DiagnosticKind::EndogenousWithoutIv => {
                Error::EndogenousWithoutIv(d.message.clone())
            }
            _ => Error::Invalid(diags),
        });
    }
    let scaling_pos = spec.indicators.iter().position(|i| i == spec.scaling()).unwrap_or(0);
    let (free_params, moments) =
        parameter_budget(spec.estimator, spec.indicators.len(), spec.causes.len());
    Ok(ValidatedSpec {
        spec: spec.clone(),
        indicator_cols,
        cause_cols,
        instrument_cols,
        scaling_pos,
        free_params,
        moments,
    })
}
