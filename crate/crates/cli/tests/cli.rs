//! End-to-end tests against the built binary: exit codes, output shapes, and
//! run-to-run reproducibility.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hawkes-heston");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn verify_quick_is_byte_identical_across_runs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let out1 = run_in(first.path(), &["--seed", "42", "verify", "--suite", "quick"]);
    let out2 = run_in(second.path(), &["--seed", "42", "verify", "--suite", "quick"]);
    assert_eq!(out1.status.code(), Some(0), "{}", String::from_utf8_lossy(&out1.stderr));
    assert_eq!(out2.status.code(), Some(0));
    assert_eq!(read(first.path(), "verify.json"), read(second.path(), "verify.json"));
    assert_eq!(out1.stdout, out2.stdout);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));

    let bad_flag = run_in(dir.path(), &["odes", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    let out = run_in(dir.path(), &["--config", garbled.to_str().unwrap(), "cl-solve"]);
    assert_eq!(out.status.code(), Some(2));

    // Structurally valid JSON that fails validation: Feller violated.
    let infeasible = dir.path().join("infeasible.json");
    let mut text = std::fs::read_to_string(example_config()).unwrap();
    text = text.replace("\"sigma\": 0.3", "\"sigma\": 3.0");
    std::fs::write(&infeasible, text).unwrap();
    let out = run_in(dir.path(), &["--config", infeasible.to_str().unwrap(), "cl-solve"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("feller"), "stderr: {stderr}");
}

fn example_config() -> String {
    format!("{}/../../config.example.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn example_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--config", &example_config(), "simulate", "--paths", "2", "--grid-steps", "16"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let paths = read(dir.path(), "paths.csv");
    assert!(paths.starts_with("path,t,v,log_s,lambda,n,l\n"), "header: {paths:.60}");
    let events = read(dir.path(), "events.csv");
    assert!(events.starts_with("path,t_event,mark,lambda_after_event\n"));
}

#[test]
fn exponent_beyond_the_edge_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["bound-check", "--c", "100.0", "--paths", "200"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cs_table_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["cs-table"]);
    assert_eq!(out.status.code(), Some(0));
    let table = read(dir.path(), "cs_table.csv");
    let mut rows = 0;
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let c_s: f64 = fields[1].parse().unwrap();
        let c_l: f64 = fields[2].parse().unwrap();
        assert!(c_s < c_l, "row {line}");
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn odes_at_zero_exponent_dump_zero_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["odes", "--c", "0.0", "--grid-steps", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = read(dir.path(), "odes.csv");
    assert_eq!(csv.lines().next(), Some("t,g,h,f"));
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        for col in &fields[1..] {
            assert_eq!(col.parse::<f64>().unwrap(), 0.0, "row {line}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "odes.json")).unwrap();
    assert_eq!(summary["bound_m0"].as_f64().unwrap(), 1.0);
}

#[test]
fn martingale_check_reports_the_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--seed", "7", "martingale-check", "--paths", "400", "--grid-steps", "50"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "martingale_check.json")).unwrap();
    for key in ["a", "classification", "estimate", "std_error", "target", "pass"] {
        assert!(json.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(json["classification"].as_str().unwrap(), "elmm");
}
