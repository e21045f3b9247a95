use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equivchar")).args(args).env("EQUIVCHAR_THREADS", "2").output().expect("binary runs")
}

fn config(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("equivchar-{}-{name}.toml", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn cs_passes_with_stable_field_order() {
    let out = run(&["cs"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["scenario", "conventions", "results", "pass"]);
    let op = &v["results"][0];
    let keys: Vec<&str> = op.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["operation", "values", "checks", "convergence", "pass"]);
    assert_eq!(op["operation"], "cs");
}

#[test]
fn missing_field_is_a_parse_error() {
    let path = config("missing", "[scenario]\nname = \"x\"\n\n[base]\ngrid = 16\n");
    let out = run(&["xi", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("group"));
    let path = config("badline", "[scenario]\ngroup = \"SU2\"\n\n[base]\ngrid = \"many\"\n");
    let out = run(&["xi", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn invariant_violation_exits_three() {
    assert_eq!(run(&["xi", "--grid", "4"]).status.code(), Some(3));
    let path = config("winding", "[scenario]\ngroup = \"SU2\"\n\n[twist]\nkind = \"winding\"\n");
    assert_eq!(run(&["xi", "--config", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn numerical_failure_exits_one() {
    let out = run(&["xi", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL xi resolution"));
}

#[test]
fn csv_has_one_row_per_check() {
    let out = run(&["curvature", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("operation,check,max_residual,tolerance,pass,samples"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("curvature,")));
}

#[test]
fn reports_are_byte_identical_across_runs_and_modes() {
    let a = run(&["xi"]).stdout;
    assert_eq!(a, run(&["xi"]).stdout);
    assert_eq!(a, run(&["xi", "--parallel"]).stdout);
}
