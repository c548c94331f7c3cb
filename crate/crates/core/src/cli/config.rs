//! Model configuration grammar.
//!
//! ```text
//! # comments start with '#'
//! [indicators]
//! y1
//! y2
//! [causes]
//! x1
//! [instruments]
//! w1
//! [options]
//! estimator = TSLS_MIMIC
//! scaling_indicator = y1
//! endogenous = x1
//! integration = x1:I1, x2:I0
//! ```
//!
//! One label per line inside the list sections. `estimator` is required;
//! the other options are optional.

use std::collections::HashMap;

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::model::{check_spec, Estimator, IntegrationOrder, ModelSpec};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Indicators,
    Causes,
    Instruments,
    Options,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

/// 1-based column of byte offset `at` in `line`.
fn column_of(line: &str, at: usize) -> usize {
    line[..at].chars().count() + 1
}

fn is_label(s: &str) -> bool {
    !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || matches!(c, ',' | '=' | '[' | ']' | ':' | '#'))
}

/// Items of a comma list with their byte offsets in the full line.
fn comma_items(value: &str, offset: usize) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in value.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        out.push((piece.trim(), offset + start + lead));
        start += piece.len() + 1;
    }
    out
}

/// Parses and validates a model configuration. Syntax errors stop at the
/// first offending token; validation reports every problem, each tagged
/// with the line that declared the label involved.
pub fn parse_model_config(text: &str) -> Result<ModelSpec> {
    let mut section = None;
    let (mut indicators, mut causes, mut instruments) = (Vec::new(), Vec::new(), Vec::new());
    let mut endogenous = Vec::new();
    let mut integration = std::collections::BTreeMap::new();
    let mut estimator = None;
    let mut scaling = None;
    let mut declared: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let start = content.len() - content.trim_start().len();
        let col = column_of(raw, start);
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(ln, col, format!("unterminated section header `{trimmed}`")))?;
            section = Some(match name.trim() {
                "indicators" => Section::Indicators,
                "causes" => Section::Causes,
                "instruments" => Section::Instruments,
                "options" => Section::Options,
                other => return Err(parse_error(ln, col + 1, format!("unknown section `[{other}]`"))),
            });
            continue;
        }
        let Some(sec) = section else {
            return Err(parse_error(ln, col, format!("`{trimmed}` appears before any section header")));
        };
        if sec != Section::Options {
            if !is_label(trimmed) {
                return Err(parse_error(ln, col, format!("expected a single label, found `{trimmed}`")));
            }
            declared.insert(trimmed.to_string(), ln);
            match sec {
                Section::Indicators => indicators.push(trimmed.to_string()),
                Section::Causes => causes.push(trimmed.to_string()),
                _ => instruments.push(trimmed.to_string()),
            }
            continue;
        }
        let eq = content.find('=').ok_or_else(|| parse_error(ln, col, "expected `key = value`"))?;
        let key = content[..eq].trim();
        let value_raw = &content[eq + 1..];
        let value_at = eq + 1 + (value_raw.len() - value_raw.trim_start().len());
        let value = value_raw.trim();
        let vcol = column_of(raw, value_at);
        match key {
            "estimator" => {
                let e: Estimator = value
                    .parse()
                    .map_err(|_| parse_error(ln, vcol, format!("unknown estimator `{value}`")))?;
                estimator = Some(e);
            }
            "scaling_indicator" => {
                if !is_label(value) {
                    return Err(parse_error(ln, vcol, format!("expected a label, found `{value}`")));
                }
                scaling = Some(value.to_string());
            }
            "endogenous" => {
                for (item, at) in comma_items(value, value_at) {
                    if !is_label(item) {
                        return Err(parse_error(ln, column_of(raw, at), format!("expected a label, found `{item}`")));
                    }
                    declared.insert(item.to_string(), ln);
                    endogenous.push(item.to_string());
                }
            }
            "integration" => {
                for (item, at) in comma_items(value, value_at) {
                    let c = column_of(raw, at);
                    let (label, order) = item
                        .split_once(':')
                        .ok_or_else(|| parse_error(ln, c, format!("expected `label:I0` or `label:I1`, found `{item}`")))?;
                    let label = label.trim();
                    if !is_label(label) {
                        return Err(parse_error(ln, c, format!("expected a label, found `{label}`")));
                    }
                    let order: IntegrationOrder = order.parse().map_err(|m: String| parse_error(ln, c, m))?;
                    integration.insert(label.to_string(), order);
                }
            }
            _ => {
                let kcol = column_of(raw, content.find(key).unwrap_or(start));
                return Err(parse_error(ln, kcol, format!("unknown option `{key}`")));
            }
        }
    }

    let Some(estimator) = estimator else {
        return Err(Error::Invalid(vec![Diagnostic::new(DiagnosticKind::InvalidSpec, "missing `estimator` option")]));
    };
    let mut spec = ModelSpec::new(indicators, causes, estimator);
    spec.instruments = instruments;
    spec.endogenous_causes = endogenous;
    spec.integration_order = integration;
    spec.scaling_indicator = scaling;
    let diags = locate(check_spec(&spec), &declared);
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Invalid(diags))
    }
}

/// Attaches to each diagnostic the line that last declared the first label
/// it quotes.
pub(crate) fn locate(diags: Vec<Diagnostic>, declared: &HashMap<String, usize>) -> Vec<Diagnostic> {
    diags
        .into_iter()
        .map(|d| {
            let label = d.message.split('`').nth(1).map(str::to_string);
            match label.and_then(|l| declared.get(&l).copied()) {
                Some(line) if d.line.is_none() => d.at_line(line),
                _ => d,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let s = parse_model_config("[indicators]\ny1\ny2\n[causes]\nx1\n[options]\nestimator=MIMIC\n").unwrap();
        assert_eq!(s.indicators, vec!["y1", "y2"]);
        assert_eq!(s.causes, vec!["x1"]);
        assert_eq!(s.estimator, Estimator::Mimic);
        assert!(s.instruments.is_empty());
    }

    #[test]
    fn full_config_with_comments() {
        let text = "# model\n[indicators]\n  y1 # scale\ny2\ny3\n\n[causes]\nx1\nx2\n[instruments]\nw1\nw2\n[options]\n\
                    estimator = tsls_emimic\nscaling_indicator = y2\nendogenous = x1\nintegration = x1:I1, x2 : I0\n";
        let s = parse_model_config(text).unwrap();
        assert_eq!(s.estimator, Estimator::TslsEmimic);
        assert_eq!(s.scaling(), "y2");
        assert_eq!(s.endogenous_causes, vec!["x1"]);
        assert_eq!(s.integration_order.get("x2"), Some(&IntegrationOrder::I0));
        assert_eq!(s.instruments, vec!["w1", "w2"]);
    }

    #[test]
    fn unknown_estimator_names_token_and_position() {
        let text = "[indicators]\ny1\ny2\n[causes]\nx1\n[options]\nestimator =  PLS\n";
        match parse_model_config(text) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (7, 14));
                assert!(message.contains("PLS"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_label_without_endogenous_flag() {
        let text = "[indicators]\ny1\ny2\n[causes]\nx1\ny2\n[options]\nestimator = MIMIC\n";
        let Err(Error::Invalid(d)) = parse_model_config(text) else { panic!() };
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::DuplicateLabel && x.line == Some(6)));
    }

    #[test]
    fn every_problem_is_reported() {
        let text = "[indicators]\ny1\n[causes]\nx1\n[options]\nestimator = MIMIC\nendogenous = x1\n";
        let Err(Error::Invalid(d)) = parse_model_config(text) else { panic!() };
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::InvalidSpec));
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::EndogenousWithoutIv && x.line == Some(7)));
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::Underidentified));
    }

    #[test]
    fn syntax_errors_carry_locations() {
        let cases = [
            ("y1\n", 1, 1),
            ("[indicators]\ny1 y2\n", 2, 1),
            ("[indicatrs]\n", 1, 2),
            ("[options]\nestimator MIMIC\n", 2, 1),
            ("[options]\n  colour = red\n", 2, 3),
            ("[options]\nintegration = x1:I2\n", 2, 15),
            ("[options]\nendogenous = x1, ,x2\n", 2, 18),
            ("[causes\n", 1, 1),
        ];
        for (text, line, column) in cases {
            match parse_model_config(text) {
                Err(Error::Parse { line: l, column: c, .. }) => assert_eq!((l, c), (line, column), "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_estimator_is_a_diagnostic() {
        let r = parse_model_config("[indicators]\ny1\ny2\n[causes]\nx1\n");
        assert!(matches!(r, Err(Error::Invalid(_))));
    }
}
