use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gmprune(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmprune"))
        .current_dir(dir)
        .args(args)
        .env_remove("GMPRUNE_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = gmprune(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn toy(dir: &Path) -> PathBuf {
    ok(dir, &["simulate", "--n", "400", "--seed", "3", "--out", "toy.gmpk"]);
    dir.join("toy.gmpk")
}

#[test]
fn simulate_writes_set_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let side = json(dir.path().join("toy.gmpk.json"));
    assert_eq!(side["n"], 400);
    assert_eq!(side["d"], 2);
    assert_eq!(side["n_corrupt"], 80);
    assert_eq!(side["alpha"], 0.25);
    assert_eq!(side["config"]["command"], "simulate");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    assert_eq!(gmprune(d, &["gm", "--input", "toy.gmpk"]).status.code(), Some(0));
    let slow = gmprune(d, &["gm", "--input", "toy.gmpk", "--max-iters", "1", "--out", "g.json"]);
    assert_eq!(slow.status.code(), Some(2));
    assert_eq!(json(d.join("g.json"))["converged"], false);

    let missing = gmprune(d, &["gm", "--input", "nope.gmpk"]);
    assert_eq!(missing.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&missing.stderr);
    assert!(msg.starts_with("error:") && msg.contains("[IO_FAILURE]"), "{msg}");

    assert_eq!(gmprune(d, &["gm", "--bogus"]).status.code(), Some(1));
    assert_eq!(gmprune(d, &["--help"]).status.code(), Some(0));

    let grouped = gmprune(d, &["select", "--input", "toy.gmpk", "--k", "5", "--group-by-labels"]);
    assert_eq!(grouped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&grouped.stderr).contains("[MISSING_LABELS]"));

    let too_many = gmprune(d, &["select", "--input", "toy.gmpk", "--k", "401"]);
    assert_eq!(too_many.status.code(), Some(1));
    let bad_psi = gmprune(d, &["simulate", "--psi", "0.5", "--out", "x.gmpk"]);
    assert_eq!(bad_psi.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_psi.stderr).contains("[PSI_OUT_OF_RANGE]"));

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_gmprune"))
        .current_dir(d)
        .args(["gm", "--input", "toy.gmpk"])
        .env("GMPRUNE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn config_must_match_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    ok(d, &["gm", "--input", "toy.gmpk", "--out", "g.json"]);
    let out = gmprune(d, &["select", "--input", "toy.gmpk", "--k", "4", "--config", "g.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_values_win_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    std::fs::write(d.join("c.json"), r#"{"command": "select", "selector": {"method": "hard", "k": 7}}"#).unwrap();
    ok(d, &["select", "--input", "toy.gmpk", "--k", "3", "--config", "c.json", "--out", "s.json"]);
    let s = json(d.join("s.json"));
    assert_eq!(s["method"], "hard");
    assert_eq!(s["indices"].as_array().unwrap().len(), 7);
}

#[test]
fn select_output_and_subset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    ok(d, &[
        "select", "--input", "toy.gmpk", "--k", "16", "--out", "s.json", "--emit-subset", "sub.csv",
    ]);
    let s = json(d.join("s.json"));
    let idx: Vec<u64> = s["indices"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(idx.len(), 16);
    assert_eq!(s["residual_trace"].as_array().unwrap().len(), 16);
    assert_eq!(s["config"]["command"], "select");
    let csv = std::fs::read_to_string(d.join("sub.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count(), 16);
}

#[test]
fn report_json_and_csv_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    ok(d, &["select", "--input", "toy.gmpk", "--k", "64", "--out", "s.json"]);
    ok(d, &["report", "--input", "toy.gmpk", "--selection", "s.json", "--out", "r.json"]);
    ok(d, &[
        "report", "--input", "toy.gmpk", "--selection", "s.json", "--format", "csv", "--out", "r.csv",
    ]);
    let r = json(d.join("r.json"));
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("field,value"));
    let mut seen = 0;
    for line in lines {
        let (field, value) = line.split_once(',').unwrap();
        if let Some(v) = r.get(field).and_then(Value::as_f64) {
            let parsed: f64 = value.parse().unwrap();
            assert!((parsed - v).abs() <= 1e-12 * v.abs().max(1.0), "{field}");
            seen += 1;
        }
    }
    assert!(seen >= 4, "{csv}");
    assert_eq!(r["k"], 64);
    let precision = r["clean_precision"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&precision));
    assert_eq!(r["bound_satisfied"], true);
}

#[test]
fn sweep_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &[
        "sweep", "--methods", "gm-match,random", "--ks", "8,16,32", "--seeds", "2", "--n", "300", "--out",
        "grid.csv",
    ]);
    let csv = std::fs::read_to_string(d.join("grid.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,k,seed,residual,clean_error,clean_precision"));
    assert_eq!(lines.count(), 2 * 3 * 2);
    let summary = json(d.join("grid.json"));
    assert_eq!(summary["config"]["command"], "sweep");

    ok(d, &[
        "sweep", "--breakdown", "--psis", "0.1,0.2", "--mags", "1e3,1e6", "--n", "200", "--out", "b.csv",
    ]);
    let table = std::fs::read_to_string(d.join("b.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("psi,magnitude,estimator,error,converged"));
    assert_eq!(lines.count(), 2 * 2 * 2);
}

fn rerun_is_identical(d: &Path, args: &[&str], artifact: &str) {
    ok(d, args);
    let first = std::fs::read(d.join(artifact)).unwrap();
    std::fs::copy(d.join(artifact), d.join("prev.json")).unwrap();
    let cmd = args[0];
    ok(d, &[cmd, "--config", "prev.json"]);
    assert_eq!(std::fs::read(d.join(artifact)).unwrap(), first, "{cmd}");
}

#[test]
fn reruns_from_embedded_config_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    rerun_is_identical(d, &["gm", "--input", "toy.gmpk", "--out", "g.json"], "g.json");
    rerun_is_identical(
        d,
        &["select", "--input", "toy.gmpk", "--method", "moderate", "--k", "33", "--out", "s.json"],
        "s.json",
    );
    rerun_is_identical(d, &["report", "--input", "toy.gmpk", "--selection", "s.json", "--out", "r.json"], "r.json");

    ok(d, &["simulate", "--n", "100", "--mode", "point-at-magnitude", "--magnitude", "1e6", "--out", "p.gmpk"]);
    let set = std::fs::read(d.join("p.gmpk")).unwrap();
    std::fs::copy(d.join("p.gmpk.json"), d.join("prev.json")).unwrap();
    ok(d, &["simulate", "--config", "prev.json"]);
    assert_eq!(std::fs::read(d.join("p.gmpk")).unwrap(), set);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy(d);
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out = Command::new(env!("CARGO_BIN_EXE_gmprune"))
            .current_dir(d)
            .args(["select", "--input", "toy.gmpk", "--k", "100", "--replacement", "with"])
            .env("GMPRUNE_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outs.push(out.stdout);
    }
    assert_eq!(outs[0], outs[1]);
}
