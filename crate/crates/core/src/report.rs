//! Named-scalar reports with deterministic serialization (JSON + RFC-4180 CSV).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Run metadata embedded in every report. The timestamp is informational and
/// must be excluded from any cache hashing.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Metadata {
    pub scenario_hash: String,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
    /// Unix seconds at emission time.
    pub timestamp: u64,
}

/// Per-stratum diagnostics for the shell-stratified seminorm estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratumDiag {
    pub stratum: usize,
    pub pairs: u64,
    pub mean_kernel: f64,
    pub stderr: f64,
}

/// A named scalar map (values, ratios, fitted slopes) plus the thresholds it
/// was judged against. Key order is fixed (BTreeMap), so serialization is
/// byte-stable for identical inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub values: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub passed: Option<bool>,
    pub metadata: Metadata,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub strata: Vec<StratumDiag>,
    /// Structured payloads (witness paths, per-case tables).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Report {
        Report {
            name: name.into(),
            values: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            passed: None,
            metadata: Metadata::default(),
            strata: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.values.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn threshold(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.thresholds.insert(key.into(), value);
        self
    }

    pub fn stamp(&mut self) -> &mut Self {
        self.metadata.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self
    }

    /// Every value must be finite.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.values {
            if !v.is_finite() {
                return Err(Error::Schema(format!("report value `{k}` is not finite")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Key/value rows, RFC-4180, `.` decimal separator.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\r\n");
        for (k, v) in &self.values {
            out.push_str(&csv_field(k));
            out.push(',');
            out.push_str(&format!("{v}"));
            out.push_str("\r\n");
        }
        out
    }

    /// Per-stratum diagnostics table.
    pub fn strata_csv(&self) -> String {
        let mut out = String::from("stratum,pairs,mean_kernel,stderr\r\n");
        for s in &self.strata {
            out.push_str(&format!(
                "{},{},{},{}\r\n",
                s.stratum, s.pairs, s.mean_kernel, s.stderr
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_json_key_order() {
        let mut r = Report::new("demo");
        r.set("zeta", 1.0).set("alpha", 2.0);
        let j = r.to_json().unwrap();
        assert!(j.find("alpha").unwrap() < j.find("zeta").unwrap());
    }

    #[test]
    fn round_trips_through_json() {
        let mut r = Report::new("demo");
        r.set("a", 0.5).threshold("a_max", 1.0);
        r.passed = Some(true);
        let j = r.to_json().unwrap();
        let back: Report = serde_json::from_str(&j).unwrap();
        assert_eq!(back.get("a"), Some(0.5));
        assert_eq!(back.thresholds.get("a_max"), Some(&1.0));
        assert_eq!(back.passed, Some(true));
    }

    #[test]
    fn rejects_non_finite() {
        let mut r = Report::new("demo");
        r.set("bad", f64::NAN);
        assert!(r.validate().is_err());
        let mut ok = Report::new("demo");
        ok.set("fine", 1.0);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn csv_quoting() {
        let mut r = Report::new("demo");
        r.set("plain", 1.0);
        r.set("with,comma", 2.0);
        let csv = r.to_csv();
        assert!(csv.starts_with("key,value\r\n"));
        assert!(csv.contains("\"with,comma\",2"));
    }

    #[test]
    fn strata_table() {
        let mut r = Report::new("demo");
        r.strata.push(StratumDiag {
            stratum: 0,
            pairs: 100,
            mean_kernel: 0.5,
            stderr: 0.01,
        });
        let csv = r.strata_csv();
        assert!(csv.contains("0,100,0.5,0.01"));
    }
}
