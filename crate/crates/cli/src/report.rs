//! Report envelope, provenance tags and output formats.

use nsgap::num::ext_f64;
use nsgap::rayleigh::GapKind;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const TOOL: &str = "nsgap";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How a reported number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed form, exact spectral evaluation or direct formula.
    Exact,
    /// Exhaustive enumeration.
    BruteForce,
    /// Output of an optimizer with no optimality certificate.
    Heuristic,
    /// Empirically fitted constant, or a formula using one.
    Fitted,
}

impl From<GapKind> for Provenance {
    fn from(k: GapKind) -> Self {
        match k {
            GapKind::ExactHilbert | GapKind::UpperBoundThm4 => Provenance::Exact,
            GapKind::BruteForce => Provenance::BruteForce,
            GapKind::HeuristicLowerBound => Provenance::Heuristic,
        }
    }
}

/// A number with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tagged {
    #[serde(with = "ext_f64")]
    pub value: f64,
    pub provenance: Provenance,
}

/// Named headline values of a result, each tagged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Values(pub BTreeMap<String, Tagged>);

impl Values {
    pub fn new() -> Self {
        Values::default()
    }

    pub fn with(mut self, name: &str, value: f64, provenance: Provenance) -> Self {
        self.0.insert(name.to_string(), Tagged { value, provenance });
        self
    }

    pub fn insert(&mut self, name: &str, value: f64, provenance: Provenance) {
        self.0.insert(name.to_string(), Tagged { value, provenance });
    }
}

/// The result part of a report: tagged headline values plus the full
/// module output.
pub fn result(values: Values, detail: impl Serialize) -> Value {
    json!({ "values": values, "detail": serde_json::to_value(detail).unwrap_or(Value::Null) })
}

/// Self-describing report written by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub config_hash: String,
    pub seed: u64,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, config: Value, seed: u64, result: Value) -> Self {
        let config_hash = config_hash(command, &config, seed);
        Report { tool: TOOL.into(), version: VERSION.into(), command: command.into(), config, config_hash, seed, result }
    }
}

/// SHA-256 of the canonical JSON of `(command, config, seed)`; object keys
/// are sorted so the hash does not depend on field order.
pub fn config_hash(command: &str, config: &Value, seed: u64) -> String {
    let canonical = json!({ "command": command, "config": config, "seed": seed }).to_string();
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports are serializable");
    s.push('\n');
    s
}

/// `path,value` rows of every leaf of the report, in document order.
pub fn to_csv(report: &Report) -> String {
    let mut rows = Vec::new();
    flatten("", &serde_json::to_value(report).expect("reports are serializable"), &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "value"]).expect("in-memory write");
    for (k, v) in rows {
        w.write_record([k, v]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Arbitrary rows as CSV (used for tabular dumps such as pairwise distances).
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order_but_not_values() {
        let a = json!({"p": 2, "q": 3});
        let b: Value = serde_json::from_str(r#"{"q": 3, "p": 2}"#).unwrap();
        assert_eq!(config_hash("gap", &a, 1), config_hash("gap", &b, 1));
        assert_ne!(config_hash("gap", &a, 1), config_hash("gap", &a, 2));
        assert_eq!(config_hash("gap", &a, 1).len(), 64);
    }

    #[test]
    fn csv_flattens_nested_values() {
        let r = Report::new("x", json!({"a": [1, 2]}), 7, json!({"v": {"w": "inf"}}));
        let csv = to_csv(&r);
        assert!(csv.contains("config.a.1,2"));
        assert!(csv.contains("result.v.w,inf"));
        assert!(csv.starts_with("path,value\n"));
    }

    #[test]
    fn tagged_infinity_round_trips() {
        let v = Values::new().with("gamma", f64::INFINITY, Provenance::Exact);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"gamma":{"value":"inf","provenance":"exact"}}"#);
        assert_eq!(serde_json::from_str::<Values>(&s).unwrap(), v);
    }
}
