use plugflow_cli::config::RunConfig;
use serde_json::Value;
use std::path::Path;

fn cli(args: &[&str]) -> i32 {
    plugflow_cli::run(std::iter::once("plugflow").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Default config shrunk so a sweep row takes a fraction of a second.
fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut c = RunConfig::default();
    c.budgets.t_max = 200.0;
    c.budgets.max_events = 200;
    c.periodic.nr = 2;
    c.periodic.ntheta = 2;
    c.periodic.nz = 2;
    c.entropy.count = 10;
    c.entropy.t_grid = vec![5.0, 10.0];
    c.entropy.max_events = 200;
    let p = dir.join("tiny.toml");
    std::fs::write(&p, c.to_toml()).unwrap();
    p
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, RunConfig::default().to_toml() + "\nbogus = 1\n").unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cli(&["validate", "--config", s(&bad), "--out", s(&out)]), 2);
    assert_eq!(cli(&["validate", "--config", s(&tmp.path().join("missing.toml")), "--out", s(&out)]), 2);
    assert_eq!(cli(&["orbit", "--start", "2,1", "--out", s(&out)]), 2);
    assert_eq!(cli(&["periodic", "--seed-grid", "4x4", "--out", s(&out)]), 2);
    assert_eq!(cli(&["frobnicate"]), 2);
    assert_eq!(cli(&["--help"]), 0);
}

#[test]
fn empty_sweep_is_an_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cli(&["sweep", "--eps=", "--out", s(&out)]), 0);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("# config_hash="));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn duplicate_offsets_are_dropped_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("out");
    assert_eq!(cli(&["sweep", "--eps", "0,0.05,0", "--config", s(&cfg), "--out", s(&out)]), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let eps: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["epsilon"].as_f64().unwrap()).collect();
    assert_eq!(eps, [0.0, 0.05]);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn failing_offsets_keep_their_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("out");
    // Offset 5 breaks the radius condition of the faces, so that plug cannot be built.
    assert_eq!(cli(&["sweep", "--eps", "5,0", "--config", s(&cfg), "--out", s(&out)]), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert!(rows[0]["error"].is_string());
    assert!(rows[1]["error"].is_null() && rows[1]["periodic_orbits"].is_u64());
}

#[test]
fn every_output_carries_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("out");
    assert_eq!(cli(&["orbit", "--start", "2.3,1,0", "--config", s(&cfg), "--out", s(&out)]), 0);
    // The hash is of the effective config, which the run echoes.
    let hash = RunConfig::load(&out.join("config.toml")).unwrap().hash();
    for name in ["config.toml", "orbit.csv"] {
        let first = std::fs::read_to_string(out.join(name)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(first, format!("# config_hash={hash}"));
    }
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("orbit.json")).unwrap()).unwrap();
    assert_eq!(v["config_hash"], hash.as_str());
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("out");
    assert_eq!(cli(&["validate", "--config", s(&cfg), "--out", s(&out), "--budget-time", "123"]), 0);
    let echoed = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(echoed.budgets.t_max, 123.0);
    assert_eq!(echoed.out, out);
}
