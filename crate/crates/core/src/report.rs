//! Validation findings collected while loading configuration and data.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const GLOBAL_SCOPE: &str = "global";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub severity: Severity,
    /// Municipality id, KPI code or [`GLOBAL_SCOPE`].
    pub scope: String,
    pub message: String,
}

impl ValidationEntry {
    fn sort_key(&self) -> (&str, &str, Severity) {
        (&self.scope, &self.message, self.severity)
    }
}

/// Entries are kept ordered by scope, then message, so two runs over the
/// same input render identically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    entries: Vec<ValidationEntry>,
    /// Non-missing values per KPI code after a join.
    pub coverage: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, severity: Severity, scope: impl Into<String>, message: impl Into<String>) {
        let entry = ValidationEntry {
            severity,
            scope: scope.into(),
            message: message.into(),
        };
        let at = self.entries.partition_point(|e| e.sort_key() <= entry.sort_key());
        self.entries.insert(at, entry);
    }

    pub fn error(&mut self, scope: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, scope, message);
    }

    pub fn warning(&mut self, scope: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Warning, scope, message);
    }

    pub fn merge(&mut self, other: ValidationReport) {
        for e in other.entries {
            self.push(e.severity, e.scope, e.message);
        }
        for (k, v) in other.coverage {
            self.coverage.insert(k, v);
        }
    }

    pub fn entries(&self) -> &[ValidationEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.entries.iter().any(|e| e.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| e.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| e.severity == Severity::Warning)
    }

    /// One tab-separated line per entry, followed by the coverage table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.severity, e.scope, e.message));
        }
        if !self.coverage.is_empty() {
            out.push_str("# coverage\n");
            for (code, n) in &self.coverage {
                out.push_str(&format!("coverage\t{code}\t{n}\n"));
            }
        }
        out
    }
}

/// Six-decimal fixed notation used by every numeric output file. Values
/// that round to zero print without a sign.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// [`fixed6`], or an empty cell for `None`.
pub fn fixed6_opt(v: Option<f64>) -> String {
    v.map(fixed6).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_notation() {
        assert_eq!(fixed6(100.0), "100.000000");
        assert_eq!(fixed6(-1e-9), "0.000000");
        assert_eq!(fixed6(2.0 / 3.0), "0.666667");
        assert_eq!(fixed6_opt(None), "");
    }

    #[test]
    fn entries_are_ordered_by_scope_then_message() {
        let mut r = ValidationReport::new();
        r.warning("M002", "b");
        r.error("M001", "z");
        r.warning("M001", "a");
        let scopes: Vec<_> = r
            .entries()
            .iter()
            .map(|e| (e.scope.as_str(), e.message.as_str()))
            .collect();
        assert_eq!(scopes, vec![("M001", "a"), ("M001", "z"), ("M002", "b")]);
        assert!(r.has_errors());
        assert_eq!(r.warnings().count(), 2);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let mut a = ValidationReport::new();
        let mut b = ValidationReport::new();
        let items = [("x", "1"), ("a", "2"), ("m", "0"), ("a", "1")];
        for (s, m) in items {
            a.warning(s, m);
        }
        for (s, m) in items.iter().rev() {
            b.warning(*s, *m);
        }
        assert_eq!(a.render(), b.render());
    }
}
