//! Verification records shared by the combinatorial checks and the runners.

use serde::Serialize;
use serde_json::Value;

/// One checked property: `{check, params, value, threshold, pass, counterexample, note}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Informational checks never fail a run.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
}

impl Check {
    pub fn new(check: impl Into<String>, params: Value, pass: bool) -> Self {
        Check {
            check: check.into(),
            params,
            value: None,
            threshold: None,
            pass,
            counterexample: None,
            note: None,
            informational: false,
        }
    }

    pub fn value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn counterexample(mut self, c: Option<String>) -> Self {
        self.counterexample = c;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    /// Passing, or informational.
    pub fn ok(&self) -> bool {
        self.pass || self.informational
    }
}
