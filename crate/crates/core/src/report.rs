use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Machine-readable outcome of an inequality check.
///
/// `pass` is always `slack >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub details: Value,
}

impl CheckReport {
    pub fn new(
        check: impl Into<String>,
        lhs: f64,
        rhs: f64,
        slack: f64,
        tolerance: f64,
        details: Value,
    ) -> Self {
        CheckReport {
            check: check.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tolerance,
            tolerance,
            details,
        }
    }

    /// Report for `lhs <= rhs` with slack `rhs - lhs`.
    pub fn upper_bound(
        check: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        details: Value,
    ) -> Self {
        Self::new(check, lhs, rhs, rhs - lhs, tolerance, details)
    }
}
