use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn linwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linwave")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn report_shape(v: &Value) {
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["background", "pass", "results", "suite"]);
}

#[test]
fn identities_check_passes_on_minkowski() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = linwave(&["check", "--suite", "identities", "--background", "minkowski-torus", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("check-identities.json"));
    report_shape(&report);
    assert_eq!(report["pass"], true);
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 10);
    assert!(results.iter().all(|r| r["value"].as_f64().unwrap() <= 1e-10));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["check"]["suite"], "identities");
}

#[test]
fn spectrum_reproduces_the_membership_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = linwave(&[
        "spectrum", "--generator", "dirac-derivative", "--order", "2", "--sobolev", "-3,-2", "--truncations", "64,128,256", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("Cauchy") && text.contains("unbounded"), "{text}");
    let report = json(&dir.path().join("spectrum.json"));
    report_shape(&report);
    let rates: Vec<f64> = report["results"].as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert!((rates[0] + 1.0).abs() < 0.05 && (rates[1] - 1.0).abs() < 0.05, "{rates:?}");
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn usage_errors_exit_with_two() {
    let o = linwave(&["check", "--suite", "identities", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(linwave(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = linwave(&["decompose", "--background", "kasner", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = linwave(&["background", "--background", "kasner", "--p", "0.5,0.5,0.5", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

const MINKOWSKI: &str = "background.kind = \"minkowski-torus\"
lattice.nmax = 3
data.generator = \"random\"
data.seed = 9
evolve.t1 = 3.0
evolve.samples = [1.0, 2.0]
output.dir = \"run\"
output.snapshots = [1.5]
";

#[test]
fn evolve_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, MINKOWSKI).unwrap();
    let mut csvs = Vec::new();
    for out in ["a", "b"] {
        let out = dir.path().join(out);
        let o = linwave(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read(out.join("diagnostics.csv")).unwrap());
        assert_eq!(fs::read(out.join("evolve.json")).unwrap(), fs::read(dir.path().join("a/evolve.json")).unwrap());
        assert_eq!(fs::read(out.join("snapshot_000.lwf")).unwrap(), fs::read(dir.path().join("a/snapshot_000.lwf")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,gauge_res,dphi1_res,dphi2_res,energy_j0,energy_j1,energy_j2");
    assert_eq!(lines.len(), 6);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[1] <= 1e-12 && cells[2] <= 1e-12 && cells[3] <= 1e-12, "{line}");
    }
    let manifest = json(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["config"]["data"]["seed"], 9);
    assert_eq!(manifest["config"]["lattice"]["nmax"], 3);

    // the written snapshot restarts a run at t = 0 on the same torus
    let restart = dir.path().join("restart.toml");
    fs::write(&restart, "background.kind = \"minkowski-torus\"\ndata.snapshot = \"a/snapshot_000.lwf\"\nevolve.t1 = 1.0\n").unwrap();
    let out = dir.path().join("c");
    let o = linwave(&["evolve", "--config", restart.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_checks_and_bad_configs_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    fs::write(&cfg, format!("{MINKOWSKI}tolerances.gauge = 1e-300\ntolerances.constraints = 1e-300\n")).unwrap();
    let o = linwave(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report = json(&dir.path().join("run/evolve.json"));
    assert_eq!(report["pass"], false);

    fs::write(&cfg, format!("{MINKOWSKI}evolve.dtt = 0.1\n")).unwrap();
    let o = linwave(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 9"));
}
