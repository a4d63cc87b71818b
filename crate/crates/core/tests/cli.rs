use std::process::{Command, Output};

use serde_json::Value;

fn qcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcalc")).args(args).output().expect("run qcalc")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn exact_chu_run_exits_zero() {
    let out = qcalc(&["verify", "--identity", "chu", "--n", "0..8", "--grid", "a=1/3,-3/2;c=1/5,7/3;q=1/2,2/5", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["max_residual"], "0");
    assert_eq!(v["status"], "Verified");
    assert_eq!(v["mode"], "exact");
    assert_eq!(v["precision_bits"], Value::Null);
    assert_eq!(v["cases"].as_array().unwrap().len(), 9 * 2 * 2 * 2);
    assert_eq!(v["cases"][0]["params"]["a"], "-3/2");
}

#[test]
fn terminating_series_prints_exact_rational() {
    let out = qcalc(&["eval", "phi", "--upper", "q^-2,1/3", "--lower", "1/5", "--q", "1/2", "--z", "1/2", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["value"], "7/162");
    assert_eq!(v["terms_used"], 3);
}

#[test]
fn perturbed_gauss_exits_two() {
    let out = qcalc(&["verify", "--identity", "gauss", "--prec", "128", "--terms", "80", "--tol", "1e-25", "--perturb"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "Violated");
}

#[test]
fn truncation_shortfall_is_inconclusive() {
    // At z = 3/5 eighty terms cannot reach 1e-25.
    let out = qcalc(&["verify", "--identity", "gauss", "--prec", "128", "--terms", "80", "--tol", "1e-25"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["status"], "Inconclusive");
    assert!(!v["failures"].as_array().unwrap().is_empty());
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["verify", "--identity", "nope"][..],
        &["verify", "--identity", "chu", "--prec", "32"],
        &["verify", "--identity", "chu", "--grid", "a="],
        &["verify", "--identity", "chu", "--mode", "exact", "--prec", "128"],
        &["eval", "phi", "--q", "1/2"],
        &["frobnicate"],
    ] {
        assert_eq!(qcalc(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn failing_identity_exits_two() {
    let out = qcalc(&["verify", "--identity", "chu-deriv-a1", "--format", "md"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("| status | Violated |"));
}

#[test]
fn probe_lists_variants() {
    let out = qcalc(&["probe", "--identity", "chu-T", "--grid", "n=2;a=1/3;c=1/5;y=1/4;u=1/2;q=1/2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let names: Vec<_> = v["variants"].as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["main", "printed"]);
    assert_eq!(v["variants"][1]["status"], "Violated");
}

#[test]
fn qpoch_and_qbinom_eval() {
    let v = json(&qcalc(&["eval", "qpoch", "--a", "1/2", "--q", "1/3", "--n", "3"]));
    assert_eq!(v["value"], "85/216");
    let v = json(&qcalc(&["eval", "qbinom", "--q", "1/2", "--n", "4", "--k", "2"]));
    assert_eq!(v["value"], "35/16");
    let out = qcalc(&["eval", "qpoch", "--a", "1/2", "--q", "1/2", "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(json(&out)["error"].as_str().unwrap().contains("exact mode"));
}
