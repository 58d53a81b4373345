//! Pass/fail records for condition checks.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    /// Distance to failure in the check's own units; negative when failing.
    pub margin: f64,
    /// Worst sample, always recorded for failures.
    pub witness: Option<Vec<f64>>,
    pub note: String,
    /// Advisory checks never make the report fail.
    #[serde(default)]
    pub warning_only: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new() -> Self {
        ValidationReport { checks: Vec::new() }
    }

    /// Records a check from its margin: passes iff `margin > 0`.
    pub fn push(&mut self, id: &str, margin: f64, witness: Vec<f64>, note: impl Into<String>) {
        let pass = margin > 0.0 && margin.is_finite();
        self.push_with(id, pass, margin, witness, note);
    }

    pub fn push_with(
        &mut self,
        id: &str,
        pass: bool,
        margin: f64,
        witness: Vec<f64>,
        note: impl Into<String>,
    ) {
        self.checks.push(Check {
            id: id.to_string(),
            pass,
            margin,
            witness: Some(witness),
            note: note.into(),
            warning_only: false,
        });
    }

    pub fn push_warning(
        &mut self,
        id: &str,
        margin: f64,
        witness: Vec<f64>,
        note: impl Into<String>,
    ) {
        self.push(id, margin, witness, note);
        if let Some(c) = self.checks.last_mut() {
            c.warning_only = true;
        }
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.warning_only)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.pass && !c.warning_only)
            .collect()
    }

    pub fn warnings(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.pass && c.warning_only)
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Tracks the worst (smallest) margin over a sweep and where it happened.
#[derive(Debug, Clone)]
pub struct Worst {
    pub margin: f64,
    pub at: Vec<f64>,
}

impl Worst {
    pub fn new() -> Self {
        Worst {
            margin: f64::INFINITY,
            at: Vec::new(),
        }
    }

    pub fn see(&mut self, margin: f64, at: &[f64]) {
        if margin < self.margin || (margin.is_nan() && !self.margin.is_nan()) {
            self.margin = margin;
            self.at = at.to_vec();
        }
    }
}

impl Default for Worst {
    fn default() -> Self {
        Self::new()
    }
}
