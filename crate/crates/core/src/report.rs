//! JSON reports with sorted keys and an aligned text table for bounds.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::discrepancy::BoundReport;
use crate::error::Result;
use crate::rademacher::{EstimateMethod, RademacherEstimate};

/// One complexity estimate as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    pub quantity: String,
    pub method: EstimateMethod,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub params: Value,
}

impl EstimateReport {
    /// `params` must be a JSON object; a grid tolerance is added to it.
    pub fn new(quantity: impl Into<String>, est: &RademacherEstimate, params: Value) -> Self {
        let mut params = match params {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        if let Some(t) = est.grid_tolerance {
            params.insert("grid_tolerance".into(), t.into());
        }
        EstimateReport {
            quantity: quantity.into(),
            method: est.method,
            value: est.value,
            stderr: est.stderr,
            samples: est.samples,
            params: Value::Object(params),
        }
    }
}

/// Recursively rebuilds every object with its keys in ascending order, so
/// the output does not depend on how `serde_json` stores maps.
pub fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&sort_keys(serde_json::to_value(value)?))?;
    s.push('\n');
    Ok(s)
}

/// Itemized bound, one component per line, values right-aligned.
pub fn bound_table(r: &BoundReport) -> String {
    let rows = [
        ("source risk", r.source_risk),
        ("discrepancy", r.discrepancy),
        ("lambda terms", r.lambda_terms),
        ("complexity (source)", r.complexity_source),
        ("complexity (target)", r.complexity_target),
        ("concentration (source)", r.concentration_source),
        ("concentration (target)", r.concentration_target),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = format!("{:?} bound, confidence {}, loss bound {}\n", r.bound, r.confidence, r.loss_bound);
    for (k, v) in rows {
        out.push_str(&format!("  {k:<width$}  {v:>14.8}\n"));
    }
    out.push_str(&format!("  {:<width$}  {:>14.8}\n", "total", r.total));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_come_out_sorted() {
        let s = to_sorted_json(&json!({ "b": 1, "a": { "z": 0, "c": [ { "y": 1, "x": 2 } ] } })).unwrap();
        let pos = |k: &str| s.find(k).unwrap();
        assert!(pos("\"a\"") < pos("\"b\""));
        assert!(pos("\"c\"") < pos("\"z\""));
        assert!(pos("\"x\"") < pos("\"y\""));
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn estimate_report_fields() {
        let mut est = RademacherEstimate::analytic(1.5);
        est.grid_tolerance = Some(1e-3);
        let r = EstimateReport::new("std", &est, json!({ "p": 2.0 }));
        let v = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["quantity", "method", "value", "stderr", "samples", "params"] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(keys.len(), 6);
        assert_eq!(v["params"]["grid_tolerance"], json!(1e-3));
        let back: EstimateReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
