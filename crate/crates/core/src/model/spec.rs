use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Estimator {
    /// Static MIMIC on levels.
    #[serde(rename = "MIMIC")]
    Mimic,
    /// Static MIMIC on first differences.
    #[serde(rename = "DMIMIC")]
    Dmimic,
    /// Error-correction MIMIC.
    #[serde(rename = "EMIMIC")]
    Emimic,
    #[serde(rename = "TSLS_MIMIC")]
    TslsMimic,
    #[serde(rename = "TSLS_EMIMIC")]
    TslsEmimic,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Mimic,
        Estimator::Dmimic,
        Estimator::Emimic,
        Estimator::TslsMimic,
        Estimator::TslsEmimic,
    ];

    pub fn is_two_stage(self) -> bool {
        matches!(self, Estimator::TslsMimic | Estimator::TslsEmimic)
    }

    pub fn is_error_correction(self) -> bool {
        matches!(self, Estimator::Emimic | Estimator::TslsEmimic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Mimic => "MIMIC",
            Estimator::Dmimic => "DMIMIC",
            Estimator::Emimic => "EMIMIC",
            Estimator::TslsMimic => "TSLS_MIMIC",
            Estimator::TslsEmimic => "TSLS_EMIMIC",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown estimator `{}`", s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegrationOrder {
    I0,
    I1,
}

impl FromStr for IntegrationOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I0" | "I(0)" => Ok(IntegrationOrder::I0),
            "I1" | "I(1)" => Ok(IntegrationOrder::I1),
            other => Err(format!("unknown integration order `{other}`")),
        }
    }
}

/// Declarative model description, referring to data columns by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub indicators: Vec<String>,
    pub causes: Vec<String>,
    pub endogenous_causes: Vec<String>,
    pub instruments: Vec<String>,
    /// Pinned integration orders; causes not listed are classified from data.
    pub integration_order: BTreeMap<String, IntegrationOrder>,
    pub estimator: Estimator,
    /// Defaults to the first indicator.
    pub scaling_indicator: Option<String>,
}

impl ModelSpec {
    pub fn new<S: Into<String>>(
        indicators: impl IntoIterator<Item = S>,
        causes: impl IntoIterator<Item = S>,
        estimator: Estimator,
    ) -> Self {
        Self {
            indicators: indicators.into_iter().map(Into::into).collect(),
            causes: causes.into_iter().map(Into::into).collect(),
            endogenous_causes: Vec::new(),
            instruments: Vec::new(),
            integration_order: BTreeMap::new(),
            estimator,
            scaling_indicator: None,
        }
    }

    pub fn with_endogenous<S: Into<String>>(mut self, causes: impl IntoIterator<Item = S>) -> Self {
        self.endogenous_causes = causes.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_instruments<S: Into<String>>(mut self, ivs: impl IntoIterator<Item = S>) -> Self {
        self.instruments = ivs.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_integration(mut self, label: &str, order: IntegrationOrder) -> Self {
        self.integration_order.insert(label.to_string(), order);
        self
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn scaling(&self) -> &str {
        self.scaling_indicator
            .as_deref()
            .or_else(|| self.indicators.first().map(String::as_str))
            .unwrap_or("")
    }

    pub fn is_endogenous(&self, cause: &str) -> bool {
        self.endogenous_causes.iter().any(|c| c == cause)
    }

    /// Every column label the model touches, deduplicated, in spec order.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.indicators.iter().chain(&self.causes).chain(&self.instruments) {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }
}
