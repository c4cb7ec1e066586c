use serde::{Deserialize, Serialize};

/// Whether `lhs`, `rhs` and `margin` are natural logs or plain values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Log,
    Linear,
}

/// One verified inequality `lhs <= rhs` (or `>=`, see `relation`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub label: String,
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed slack; positive means the inequality holds strictly.
    pub margin: f64,
    pub scale: Scale,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckEntry {
    /// Check `lhs <= rhs + tol`.
    pub fn at_most(label: impl Into<String>, lhs: f64, rhs: f64, tol: f64, scale: Scale) -> Self {
        let margin = rhs - lhs;
        CheckEntry {
            label: label.into(),
            relation: "<=".into(),
            lhs,
            rhs,
            margin,
            scale,
            passed: lhs <= rhs + tol,
            note: None,
        }
    }

    /// Check `lhs >= rhs - tol`.
    pub fn at_least(label: impl Into<String>, lhs: f64, rhs: f64, tol: f64, scale: Scale) -> Self {
        let margin = lhs - rhs;
        CheckEntry {
            label: label.into(),
            relation: ">=".into(),
            lhs,
            rhs,
            margin,
            scale,
            passed: lhs >= rhs - tol,
            note: None,
        }
    }

    /// Strict `lhs < rhs`.
    pub fn below(label: impl Into<String>, lhs: f64, rhs: f64, scale: Scale) -> Self {
        let mut e = Self::at_most(label, lhs, rhs, 0.0, scale);
        e.relation = "<".into();
        e.passed = lhs < rhs;
        e
    }

    /// Strict `lhs > rhs`.
    pub fn above(label: impl Into<String>, lhs: f64, rhs: f64, scale: Scale) -> Self {
        let mut e = Self::at_least(label, lhs, rhs, 0.0, scale);
        e.relation = ">".into();
        e.passed = lhs > rhs;
        e
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A named list of checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport { name: name.into(), entries: Vec::new() }
    }

    pub fn push(&mut self, e: CheckEntry) {
        self.entries.push(e);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, label: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}
