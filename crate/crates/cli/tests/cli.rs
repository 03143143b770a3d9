use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gaplab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaplab")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn free_ids_is_one_half_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(
        &["ids", "--family", "free-jacobi", "--N", "1000", "--emin", "-1", "--emax", "1", "--points", "21", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/ids.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "E,ids");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (e, v) = l.split_once(',').unwrap();
            (e.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 21);
    let (_, at_zero) = rows.iter().find(|(e, _)| e.abs() < 1e-12).copied().unwrap();
    assert!((at_zero - 0.5).abs() <= 2.0 / 1000.0, "{at_zero}");
    for (e, v) in rows {
        let exact = 1.0 - (e / 2.0).acos() / std::f64::consts::PI;
        assert!((v - exact).abs() < 5e-3, "E={e}: {v} vs {exact}");
    }
}

#[test]
fn amo_gaps_are_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(&["gaps", "--N", "600", "--samples", "4", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("o/gaps.json"));
    assert_eq!(report["all_labelled"], Value::Bool(true));
    assert!(!report["gaps"].as_array().unwrap().is_empty());
    assert!(report["config_hash"].is_string());
}

#[test]
fn unknown_config_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"family": {"kind": "amo"}, "numerics": {"n": 100, "bogus_key": 1}, "task": {"kind": "ids"}}"#)
        .unwrap();
    let out = gaplab(&["ids", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["key"], "bogus_key");
    assert_eq!(err["exit_code"], 2);
    assert!(!dir.path().join("gaplab-out").exists());
}

#[test]
fn config_task_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"family": {"kind": "amo"}, "task": {"kind": "gaps"}}"#).unwrap();
    let out = gaplab(&["ids", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["ids", "--N", "0"],
        vec!["ids", "--alpha", "1.5"],
        vec!["project", "--family", "amo", "--class", "cmv"],
        vec!["tongues", "--family", "free-jacobi"],
        vec!["ids", "--workers", "0"],
    ] {
        let out = gaplab(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let err = stderr_json(&out);
        assert!(err["error"].is_string() && err["message"].is_string());
    }
}

#[test]
fn manifests_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(&["spectrum", "--N", "300", "--samples", "4", "--bins", "50", "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.path().join("run/manifest.json");
    let m = read_json(&manifest);
    assert_eq!(m["task"], "spectrum");
    assert_eq!(m["workers"], 1);
    let arts = m["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 2);
    for a in arts {
        assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
    }

    let fresh = gaplab(&["reproduce", manifest.to_str().unwrap()], dir.path());
    assert_eq!(fresh.status.code(), Some(0), "{}", String::from_utf8_lossy(&fresh.stderr));
    let threaded = gaplab(&["reproduce", manifest.to_str().unwrap(), "--workers", "3"], dir.path());
    assert_eq!(threaded.status.code(), Some(0), "{}", String::from_utf8_lossy(&threaded.stderr));

    let mut edited = m.clone();
    edited["config"]["numerics"]["n"] = Value::from(301);
    fs::write(&manifest, serde_json::to_string_pretty(&edited).unwrap()).unwrap();
    let changed = gaplab(&["reproduce", manifest.to_str().unwrap()], dir.path());
    assert_eq!(changed.status.code(), Some(1));
    let report = stderr_json(&changed);
    assert_eq!(report["identical"], false);
    assert_eq!(report["config_hash_matches"], false);
    let diffs = report["differences"].as_array().unwrap();
    assert!(diffs.iter().any(|d| d["path"] == "spectrum.json"));
    assert!(diffs.iter().all(|d| d["first_differing_line"].as_u64().is_some()));
}

#[test]
fn tampered_artifact_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(&["classify", "--energy", "0", "--energy", "1", "--out", "o"], dir.path());
    assert!(out.status.success());
    let manifest = dir.path().join("o/manifest.json");
    let mut m = read_json(&manifest);
    m["artifacts"][0]["sha256"] = Value::from("0".repeat(64));
    fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let res = gaplab(&["reproduce", manifest.to_str().unwrap()], dir.path());
    assert_eq!(res.status.code(), Some(1));
    let report = stderr_json(&res);
    assert_eq!(report["config_hash_matches"], true);
    assert_eq!(report["differences"][0]["path"], "classify.json");
}

#[test]
fn config_file_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"family": {"kind": "cmv", "lambda": 0.5},
            "numerics": {"n": 200, "omega_samples": 2},
            "task": {"kind": "rotation", "grid": {"min": 0.5, "max": 5.5, "points": 3}, "n_rot": 2000, "lyapunov_n": 1000},
            "output": {"dir": "from-config"}}"#,
    )
    .unwrap();
    let out = gaplab(&["rotation", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("from-config/rotation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let m = read_json(&dir.path().join("from-config/manifest.json"));
    assert_eq!(m["config"]["task"]["n_rot"], 2000);

    // flags override the file
    let out = gaplab(&["rotation", "--config", cfg.to_str().unwrap(), "--points", "2", "--out", "flag"], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("flag/rotation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn project_and_open_and_tongues_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaplab(&["project", "--class", "cmv", "--grid", "256", "--out", "p"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = read_json(&dir.path().join("p/project.json"));
    assert!(p["max_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(p["class"], "cmv");

    let out = gaplab(&["open", "--N", "400", "--samples", "2", "--tmax", "0.5", "--steps", "2", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("g/opening.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let out = gaplab(&["tongues", "--k", "1", "--dmin", "0", "--dmax", "0.1", "--steps", "2", "--out", "t"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("t/tongue_k1.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "delta,E_minus,E_plus,width,regime");
    assert!(dir.path().join("t/slopes.json").exists());
}
