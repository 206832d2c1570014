use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cgdms");

const FOUR_HALVES: &str = r#"{
  "group": {"kind": "heis_c", "n": 1},
  "maps": [
    {"translate": [1, 0, 0], "scale": 0.5},
    {"translate": [-1, 0, 0], "scale": 0.5},
    {"translate": [0, 1, 0], "scale": 0.5},
    {"translate": [0, -1, 0], "scale": 0.5}
  ]
}"#;

fn spec(dir: &Path) -> PathBuf {
    let p = dir.join("four.json");
    std::fs::write(&p, FOUR_HALVES).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn pressure_vanishes_at_the_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path());
    let v = json(&run(&["pressure", "--spec", s.to_str().unwrap(), "--t", "2"]));
    assert!(v["lower"].as_f64().unwrap().abs() < 1e-9);
    assert!(v["upper"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(v["provenance"]["edges"], 4);
}

#[test]
fn pressure_grid_is_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path());
    let out = run(&["pressure", "--spec", s.to_str().unwrap(), "--t-grid", "0:3:0.1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,p_lo,p_hi"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 31);
    assert_eq!(rows[30][0], 3.0);
    for w in rows.windows(2) {
        assert!(w[1][1] < w[0][1] && w[1][2] < w[0][2]);
    }
    for r in &rows {
        assert!(r[1] <= r[2] + 1e-12);
    }
}

#[test]
fn missing_spec_file_is_a_validation_error() {
    let out = run(&["dim", "--spec", "/nonexistent/system.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(
        String::from_utf8_lossy(&out.stderr).lines().last().unwrap(),
    )
    .unwrap();
    assert_eq!(err["error"], "validation");
}

#[test]
fn budget_errors_exit_three() {
    let out = run(&["dim", "--system", "cf", "--radius", "40", "--budget", "1000"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn continued_fraction_dimension_is_below_four() {
    let v = json(&run(&["dim", "--system", "cf", "--radius", "10", "--tol", "1e-3"]));
    let (lo, hi) = (v["h_lo"].as_f64().unwrap(), v["h_hi"].as_f64().unwrap());
    assert!(0.0 < lo && lo <= hi && hi < 4.0, "{lo} {hi}");
    assert_eq!(v["provenance"]["truncation"], 10.0);
}

#[test]
fn compare_dim_on_heisenberg() {
    let v = json(&run(&["compare-dim", "--h", "2"]));
    assert_eq!(v["euclid_lo"], 1.0);
    assert_eq!(v["euclid_hi"], 2.0);
    let out = run(&["compare-dim", "--h", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn limitset_has_one_row_per_word() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path());
    let csv = dir.path().join("cloud.csv");
    let ply = dir.path().join("cloud.ply");
    let v = json(&run(&[
        "limitset",
        "--spec",
        s.to_str().unwrap(),
        "--depth",
        "4",
        "--out",
        csv.to_str().unwrap(),
        "--ply",
        ply.to_str().unwrap(),
    ]));
    assert_eq!(v["points"], 256);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 257);
    let ply = std::fs::read_to_string(&ply).unwrap();
    assert!(ply.starts_with("ply\n") && ply.contains("element vertex 256"));
}

#[test]
fn measure_of_a_similarity_system_is_gibbs() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path());
    let v = json(&run(&["measure", "--spec", s.to_str().unwrap(), "--depth", "3"]));
    assert!((v["t"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((v["gibbs_spread"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(v["consistency_defect"].as_f64().unwrap() < 1e-12);
}

#[test]
fn measure_dimension_of_uniform_weights() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path());
    let v = json(&run(&[
        "measure-dim",
        "--spec",
        s.to_str().unwrap(),
        "--bernoulli",
        "0.25,0.25,0.25,0.25",
    ]));
    assert!(v["measure"].is_object());
    assert!((v["dimension"].as_f64().unwrap() - 2.0).abs() < 1e-9, "{v}");
}

#[test]
fn subsystem_meets_its_target() {
    let v = json(&run(&[
        "subsystem",
        "--system",
        "geometric",
        "--target",
        "0.5",
        "--tol",
        "0.01",
    ]));
    let lo = v["bracket"]["h_lo"].as_f64().unwrap();
    let hi = v["bracket"]["h_hi"].as_f64().unwrap();
    assert!(lo >= 0.49 && hi <= 0.5 + 1e-9, "{lo} {hi}");
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path());
    let s = s.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["dim", "--system", "cf", "--radius", "8"],
        vec!["pressure", "--spec", s, "--t-grid", "0:3:0.5"],
        vec!["limitset", "--spec", s, "--chaos", "500", "--seed", "3"],
        vec!["theta", "--system", "cf", "--radius", "20"],
    ];
    for args in cases {
        let a = run(&[&args[..], &["--threads", "1"]].concat());
        let b = run(&[&args[..], &["--threads", "4"]].concat());
        let c = run(&args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stdout, c.stdout, "{args:?}");
    }
}
