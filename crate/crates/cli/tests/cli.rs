//! End-to-end runs of the `bary` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bary")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn cost_line(out: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix("cost="))
        .unwrap()
        .parse()
        .unwrap()
}

const THREE_MEASURES: &str = r#"{"measures":[
  {"points":[[0.0,0.0],[3.0,1.0],[1.0,4.0]],"masses":[0.2,0.5,0.3]},
  {"points":[[2.0,2.0],[-1.0,0.5]],"masses":[0.6,0.4]},
  {"points":[[5.0,-2.0],[0.0,3.0],[2.5,2.5]],"masses":[0.1,0.45,0.45]}
]}"#;

#[test]
fn two_singletons_have_cost_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "two.json",
        r#"{"measures":[{"points":[[0.0,0.0]],"masses":[1.0]},{"points":[[2.0,0.0]],"masses":[1.0]}]}"#,
    );
    let out_path = dir.path().join("bary.json");
    let o = bary(&["solve", "--input", input.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "cost=1.0"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(json["support"].as_array().unwrap().len(), 1);
}

#[test]
fn bad_mass_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "bad.json",
        r#"{"measures":[{"points":[[0.0,0.0]],"masses":[1.0]},{"points":[[2.0,0.0]],"masses":[0.9]}]}"#,
    );
    let o = bary(&["solve", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mass sum ≠ 1"));
}

#[test]
fn backends_agree_on_cost() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "three.json", THREE_MEASURES);
    let path = input.to_str().unwrap();
    let classic = bary(&["solve", "--input", path, "--pricing", "classic"]);
    let mip = bary(&["solve", "--input", path, "--pricing", "mip", "--certify"]);
    assert!(classic.status.success() && mip.status.success());
    let (a, b) = (cost_line(&stdout(&classic)), cost_line(&stdout(&mip)));
    assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
}

#[test]
fn price_reports_a_combination() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "three.json", THREE_MEASURES);
    let duals = write(dir.path(), "duals.json", "[9,0,0,0,0,0,0,5]");
    let o = bary(&["price", "--input", input.to_str().unwrap(), "--duals", duals.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let combo: Vec<u64> = serde_json::from_value(json["combination"].clone()).unwrap();
    assert_eq!(combo.len(), 3);
    assert_eq!(combo[0], 1);
}

#[test]
fn bench_emits_one_row_per_run_and_is_reproducible() {
    let args = ["bench", "--random", "5,4,42", "--repeats", "10", "--no-timing"];
    let a = bary(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let csv = stdout(&a);
    assert_eq!(csv.lines().count(), 61);
    assert!(csv.starts_with("strategy,sorted,n,total_support,nodes,max_depth,root_frac_pct,root_unique,lp_solves,wall_ms"));
    assert_eq!(stdout(&bary(&args)), csv);
}

#[test]
fn symmetric_root_is_fully_fractional() {
    let o = bary(&["fractionality", "--symmetric", "3,3"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "3,9,100,1"));
}

#[test]
fn verify_reports_the_witness() {
    let o = bary(&["verify"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("det=-2 rank=full"));
}

#[test]
fn usage_errors_exit_with_two() {
    let o = bary(&["verify", "--p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("witness requires p ≥ 2"));
    assert_eq!(bary(&["solve", "--no-such-flag"]).status.code(), Some(2));
}
