//! Check records and run reports.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// How a residual is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Pass when `residual <= threshold`.
    #[default]
    AtMost,
    /// Pass when `residual > threshold`.
    Above,
}

/// One verified identity or structural claim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub grid: String,
    pub residual: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "is_at_most")]
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn is_at_most(c: &Comparison) -> bool {
    *c == Comparison::AtMost
}

impl CheckRecord {
    /// Residual must not exceed the threshold (NaN fails).
    pub fn at_most(id: impl Into<String>, grid: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            grid: grid.into(),
            residual,
            threshold,
            comparison: Comparison::AtMost,
            pass: residual <= threshold,
            note: None,
        }
    }

    /// Value must strictly exceed the threshold.
    pub fn above(id: impl Into<String>, grid: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            grid: grid.into(),
            residual: value,
            threshold,
            comparison: Comparison::Above,
            pass: value > threshold,
            note: None,
        }
    }

    /// Structural yes/no claim, recorded as residual 0 (holds) or 1 (fails).
    pub fn holds(id: impl Into<String>, grid: impl Into<String>, ok: bool) -> Self {
        Self::at_most(id, grid, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    /// Failure caused by an error rather than a large residual.
    pub fn failed(id: impl Into<String>, grid: impl Into<String>, err: &Error) -> Self {
        let mut r = Self::at_most(id, grid, f64::INFINITY, 0.0);
        r.pass = false;
        r.note = Some(err.to_string());
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Result of one verification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub domain_hash: String,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_seconds: Option<f64>,
}

impl RunReport {
    pub fn new(spec: &DomainSpec) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            domain_hash: domain_hash(spec),
            checks: Vec::new(),
            pass: true,
            timing_seconds: None,
        }
    }

    /// Appends a record; ids must be unique within a report.
    pub fn push(&mut self, record: CheckRecord) -> Result<()> {
        if self.checks.iter().any(|c| c.id == record.id) {
            return Err(Error::Invalid(format!("duplicate check id {}", record.id)));
        }
        self.pass &= record.pass;
        self.checks.push(record);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) -> Result<()> {
        for r in records {
            self.push(r)?;
        }
        Ok(())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// SHA-256 of the canonical JSON form of a domain spec.
pub fn domain_hash(spec: &DomainSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("domain specs serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_and_reports() {
        assert!(CheckRecord::at_most("a", "g", 1e-9, 1e-8).pass);
        assert!(!CheckRecord::at_most("a", "g", f64::NAN, 1e-8).pass);
        assert!(CheckRecord::above("b", "g", 2.0, 1.0).pass);
        assert!(!CheckRecord::above("b", "g", 1.0, 1.0).pass);

        let spec = DomainSpec::unit_disc(64);
        let mut r = RunReport::new(&spec);
        r.push(CheckRecord::holds("x", "g", true)).unwrap();
        assert!(r.push(CheckRecord::holds("x", "g", true)).is_err());
        r.push(CheckRecord::holds("y", "g", false)).unwrap();
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
        let json = r.to_json().unwrap();
        assert!(!json.contains("timing"));
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checks.len(), 2);
    }

    #[test]
    fn hash_is_stable_and_discriminating() {
        let a = domain_hash(&DomainSpec::ar(3.0, 256));
        assert_eq!(a, domain_hash(&DomainSpec::ar(3.0, 256)));
        assert_ne!(a, domain_hash(&DomainSpec::ar(3.0, 128)));
        assert_eq!(a.len(), 64);
    }
}
