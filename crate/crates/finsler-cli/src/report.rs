//! JSON report assembly.
//!
//! Reports follow the `finsler-report/1` schema: a top-level `schema` tag, a
//! deterministic `payload` object (byte-identical across reruns with the
//! same flags) and a separate `timing` object that is excluded from the
//! determinism guarantee. Floating-point numbers are printed with 17
//! significant digits so that the JSON round-trips to the exact `f64`.

use finsler_core::geometry::TangentPoint;
use finsler_core::identities::{IdentityReport, Verdict};
use serde_json::{json, Map, Number, Value};

pub const SCHEMA: &str = "finsler-report/1";

/// A float as a JSON number with 17 significant digits.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(Number::from_string_unchecked(format!("{v:.16e}")))
    } else {
        Value::String(format!("{v}"))
    }
}

pub fn num_vec(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&c| num(c)).collect())
}

pub fn num_matrix(m: &[Vec<f64>]) -> Value {
    Value::Array(m.iter().map(|r| num_vec(r)).collect())
}

pub fn tangent_point(p: &TangentPoint) -> Value {
    json!({ "x": num_vec(&p.x), "y": num_vec(&p.y) })
}

fn verdict_value(v: &Verdict) -> Value {
    match v {
        Verdict::Pass => json!({ "status": "pass" }),
        Verdict::Fail => json!({ "status": "fail" }),
        Verdict::Skipped(reason) => json!({ "status": "skipped", "reason": reason }),
    }
}

pub fn identity_report(r: &IdentityReport) -> Value {
    json!({
        "name": r.name,
        "verdict": verdict_value(&r.verdict),
        "sample_count": r.sample_count,
        "max_residual": num(r.max_residual),
        "mean_residual": num(r.mean_residual),
        "residuals": num_vec(&r.residuals),
        "worst_point": r.worst_point.as_ref().map(|p| tangent_point(p)),
    })
}

/// Wraps a payload and its timing into the versioned envelope.
pub fn envelope(payload: Value, timing: Value) -> Value {
    let mut top = Map::new();
    top.insert("schema".into(), Value::String(SCHEMA.into()));
    top.insert("payload".into(), payload);
    top.insert("timing".into(), timing);
    Value::Object(top)
}

pub fn render(report: &Value) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}
