//! Report rendering. Every number is written as a string: rationals as
//! `p/q`, floats in scientific notation. Object keys are sorted, so output
//! depends only on the report contents.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::{json, Value};

use crate::context::Mode;
use crate::error::Result;
use crate::identities::{CaseFailure, IdentityCase, IdentityReport};
use crate::scalar::Scalar;

/// Result of an `eval` command.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    pub value: Scalar,
    pub error_bound: Scalar,
    pub terms_used: Option<usize>,
    pub terminated: Option<String>,
}

impl EvalOutput {
    pub(crate) fn exact(value: Scalar) -> Self {
        EvalOutput {
            error_bound: value.zero_like(),
            value,
            terms_used: None,
            terminated: None,
        }
    }
}

fn s(x: &Scalar) -> Value {
    Value::String(x.to_canonical_string())
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Exact => "exact",
        Mode::Float { .. } => "float",
    }
}

fn precision(mode: Mode) -> Value {
    match mode {
        Mode::Exact => Value::Null,
        Mode::Float { precision_bits } => json!(precision_bits),
    }
}

fn params(p: &BTreeMap<String, Scalar>) -> Value {
    Value::Object(p.iter().map(|(k, v)| (k.clone(), s(v))).collect())
}

fn case_json(c: &IdentityCase) -> Value {
    json!({
        "params": params(&c.params),
        "lhs": s(&c.lhs),
        "rhs": s(&c.rhs),
        "residual": s(&c.residual),
        "tail_budget": c.tail_budget.as_ref().map(s).unwrap_or(Value::Null),
        "status": c.status().as_str(),
    })
}

fn failure_json(f: &CaseFailure) -> Value {
    json!({
        "params": params(&f.params),
        "error": f.error.to_string(),
    })
}

fn report_value(r: &IdentityReport) -> Value {
    json!({
        "identity": r.identity_id,
        "mode": mode_name(r.mode),
        "precision_bits": precision(r.mode),
        "cases": r.cases.iter().map(case_json).collect::<Vec<_>>(),
        "failures": r.failures.iter().map(failure_json).collect::<Vec<_>>(),
        "max_residual": s(&r.max_residual),
        "skipped_poles": r.skipped_poles,
        "status": r.status.as_str(),
    })
}

fn pretty(v: &Value) -> String {
    let mut out = serde_json::to_string_pretty(v).expect("report values serialize");
    out.push('\n');
    out
}

pub fn report_json(r: &IdentityReport) -> String {
    pretty(&report_value(r))
}

pub fn probe_json(identity: &str, reports: &[(String, IdentityReport)]) -> String {
    let variants: Vec<Value> = reports
        .iter()
        .map(|(name, r)| {
            let mut v = report_value(r);
            v["variant"] = Value::String(name.clone());
            v
        })
        .collect();
    pretty(&json!({ "identity": identity, "variants": variants }))
}

fn params_text(p: &BTreeMap<String, Scalar>) -> String {
    p.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn markdown_body(out: &mut String, r: &IdentityReport) {
    let prec = match r.mode {
        Mode::Exact => "-".to_string(),
        Mode::Float { precision_bits } => precision_bits.to_string(),
    };
    let _ = writeln!(out, "| field | value |");
    let _ = writeln!(out, "|---|---|");
    let _ = writeln!(out, "| status | {} |", r.status.as_str());
    let _ = writeln!(out, "| mode | {} |", mode_name(r.mode));
    let _ = writeln!(out, "| precision_bits | {prec} |");
    let _ = writeln!(out, "| cases | {} |", r.cases.len());
    let _ = writeln!(out, "| skipped_poles | {} |", r.skipped_poles);
    let _ = writeln!(out, "| failures | {} |", r.failures.len());
    let _ = writeln!(out, "| max_residual | {} |", r.max_residual);
    let _ = writeln!(out);
    let _ = writeln!(out, "| params | lhs | rhs | residual | tail_budget | status |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for c in &r.cases {
        let budget = c.tail_budget.as_ref().map(Scalar::to_canonical_string).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            params_text(&c.params),
            c.lhs,
            c.rhs,
            c.residual,
            budget,
            c.status().as_str()
        );
    }
    if !r.failures.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "| params | error |");
        let _ = writeln!(out, "|---|---|");
        for f in &r.failures {
            let _ = writeln!(out, "| {} | {} |", params_text(&f.params), f.error);
        }
    }
}

pub fn report_markdown(r: &IdentityReport) -> String {
    let mut out = format!("# {}\n\n", r.identity_id);
    markdown_body(&mut out, r);
    out
}

pub fn probe_markdown(identity: &str, reports: &[(String, IdentityReport)]) -> String {
    let mut out = format!("# {identity}\n\n| variant | status | max_residual |\n|---|---|---|\n");
    for (name, r) in reports {
        let _ = writeln!(out, "| {name} | {} | {} |", r.status.as_str(), r.max_residual);
    }
    for (name, r) in reports {
        let _ = write!(out, "\n## {name}\n\n");
        markdown_body(&mut out, r);
    }
    out
}

pub fn eval_json(quantity: &str, mode: Mode, inputs: &[(String, String)], outcome: &Result<EvalOutput>) -> String {
    let inputs: serde_json::Map<String, Value> = inputs.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    let mut v = json!({
        "quantity": quantity,
        "mode": mode_name(mode),
        "precision_bits": precision(mode),
        "inputs": inputs,
    });
    match outcome {
        Ok(o) => {
            v["value"] = s(&o.value);
            v["error_bound"] = s(&o.error_bound);
            v["terms_used"] = o.terms_used.map(|t| json!(t)).unwrap_or(Value::Null);
            v["terminated"] = o.terminated.clone().map(Value::String).unwrap_or(Value::Null);
        }
        Err(e) => v["error"] = Value::String(e.to_string()),
    }
    pretty(&v)
}

pub fn eval_markdown(quantity: &str, mode: Mode, inputs: &[(String, String)], outcome: &Result<EvalOutput>) -> String {
    let mut out = format!("# {quantity}\n\n| field | value |\n|---|---|\n");
    let _ = writeln!(out, "| mode | {} |", mode_name(mode));
    for (k, v) in inputs {
        let _ = writeln!(out, "| {k} | {v} |");
    }
    match outcome {
        Ok(o) => {
            let _ = writeln!(out, "| value | {} |", o.value);
            let _ = writeln!(out, "| error_bound | {} |", o.error_bound);
            if let Some(t) = o.terms_used {
                let _ = writeln!(out, "| terms_used | {t} |");
            }
            if let Some(t) = &o.terminated {
                let _ = writeln!(out, "| terminated | {t} |");
            }
        }
        Err(e) => {
            let _ = writeln!(out, "| error | {e} |");
        }
    }
    out
}
