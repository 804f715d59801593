use std::process::{Command, Output};

use serde_json::Value;

fn idk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idk")).args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const CASE1: [&str; 6] = ["--f", "x*y^(-1/5)", "--X", "y^2*x + x^3", "--Y", "(25/3)*y^3 + 15*x^2*y"];

#[test]
fn forces_examples() {
    let o = idk(&["forces", "--f", "y", "--eta", "x^2"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["X"], "x");
    assert_eq!(v["Y"], "0");
    assert_eq!(v["seed"], 0);

    let v = json(&idk(&["forces", "--f", "x*y", "--eta", "1"]));
    assert_eq!((v["X"].as_str(), v["Y"].as_str()), (Some("x"), Some("y")));

    assert_eq!(code(&idk(&["forces", "--f", "x*y", "--eta", "(("])), 2);
}

#[test]
fn forces_with_parameters_and_csv() {
    let o = idk(&["forces", "--f", "y", "--eta", "a*x^2", "--param", "a=3", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("X,Y"));
    assert_eq!(lines.next(), Some("3*x,0"));
}

#[test]
fn check_case1() {
    let mut args = vec!["check"];
    args.extend(CASE1);
    args.extend(["--g", "15,0,1"]);
    let o = idk(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert_eq!(v["multiplier"]["confidence"], "exact");
    assert!(v["V"].as_str().unwrap().contains("x^4"));
}

#[test]
fn check_identity_fails_on_case1() {
    let mut args = vec!["check"];
    args.extend(CASE1);
    let o = idk(&args);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["multiplier"]["passed"], false);
    assert!(v["V"].is_null());
}

#[test]
fn check_singular_metric() {
    let mut args = vec!["check"];
    args.extend(CASE1);
    args.extend(["--g", "1,1,1"]);
    assert_eq!(code(&idk(&args)), 3);
}

#[test]
fn check_scenarios() {
    for n in ["conics", "straight-lines", "xym-m1over3-derived"] {
        let o = idk(&["check", "--scenario", n, "--seed", "5"]);
        assert_eq!(code(&o), 0, "{n}");
        let v = json(&o);
        assert_eq!(v["seed"], 5);
        assert_eq!(v["scenario"], n);
    }
}

#[test]
fn ansatz_case1() {
    let o = idk(&["ansatz", "--m", "-1/5", "--diagonal"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["name"], "Case1-diagonal");
    assert_eq!(recs[0]["g"], serde_json::json!(["15", "0", "1"]));
    assert_eq!(recs[0]["V"], "-15/4*x^4 - 15/2*x^2*y^2 - 25/12*y^4");
}

#[test]
fn ansatz_derived_third() {
    let v = json(&idk(&["ansatz", "--m", "1/3"]));
    let recs = v["records"].as_array().unwrap();
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["origin"] == "derived"));
}

#[test]
fn ansatz_excluded() {
    assert_eq!(code(&idk(&["ansatz", "--m", "0"])), 4);
    assert_eq!(code(&idk(&["ansatz", "--m", "-1"])), 4);
}

#[test]
fn ansatz_special_values() {
    let v = json(&idk(&["ansatz", "--special"]));
    let got: Vec<&str> = v["special"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    assert_eq!(got, ["-2", "-3/2", "-2/3", "-1/2", "2", "3"]);
}

#[test]
fn orbit_case1_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("case1.csv");
    let o = idk(&["orbit", "--scenario", "xym-case1", "--point", "1,1", "--T", "1", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,x,y,vx,vy\n"));
    assert!(csv.lines().count() > 10);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("case1.json")).unwrap()).unwrap();
    assert!(side["drift"]["f_drift"].as_f64().unwrap() <= 1e-6);
    assert_eq!(side["seed"], 0);
}

#[test]
fn orbit_conics_energy() {
    let o = idk(&["orbit", "--scenario", "conics", "--point", "1,1", "--T", "2"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["ebar_c0"], 4.5);
    assert!(v["drift"]["ebar_defect"].as_f64().unwrap() < 1e-8);
}

#[test]
fn orbit_negative_eta() {
    let o = idk(&["orbit", "--scenario", "xym-m1over2", "--point", "1,1"]);
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive"));
}

#[test]
fn orbit_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    let src = json(&idk(&["scenarios"]));
    assert_eq!(src["scenarios"].as_array().unwrap().len(), 10);
    let text = r#"{
        "name": "oscillator",
        "description": "circles under a linear force",
        "origin": "trivial",
        "domain": [[-2, 2], [-2, 2]],
        "point": [1, 0.5],
        "system": {"f": "x^2 + y^2", "g": ["1", "0", "1"], "eta": "1/4", "ebar": "f/2"}
    }"#;
    std::fs::write(&file, text).unwrap();
    let o = idk(&["orbit", "--file", file.to_str().unwrap(), "--T", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["drift"]["f_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn unknown_scenario() {
    assert_eq!(code(&idk(&["orbit", "--scenario", "nope"])), 2);
}
