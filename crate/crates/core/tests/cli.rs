use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adaptive_neuro::experiments::{run_scenario, summary_from_files, RunMode, ScenarioConfig};

const BIN: &str = env!("CARGO_BIN_EXE_adaptive-neuro");

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn comparable(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("wall_time_ms");
    obj.remove("diagnostics_path");
    v
}

#[test]
fn list_presets_prints_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["list-presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert!(names.contains(&"hh") && names.contains(&"hco"), "{names:?}");
}

#[test]
fn estimate_is_deterministic_and_diagnose_reproduces_it() {
    let cfg = scenario_path("fig4-hh-noiseless");
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = cli(&["estimate", cfg], d.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let run_a = a.path().join("fig4-hh-noiseless");
    let run_b = b.path().join("fig4-hh-noiseless");
    for f in ["trajectory.csv", "config.toml", "diagnostics.json"] {
        assert_eq!(fs::read(run_a.join(f)).unwrap(), fs::read(run_b.join(f)).unwrap(), "{f} differs");
    }
    let sa = fs::read_to_string(run_a.join("summary.json")).unwrap();
    let sb = fs::read_to_string(run_b.join("summary.json")).unwrap();
    assert_eq!(comparable(&sa), comparable(&sb));

    // diagnose picks up config.toml next to the trajectory
    let traj = run_a.join("trajectory.csv");
    let out = cli(&["diagnose", traj.to_str().unwrap()], a.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(run_a.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(printed, stored);
}

#[test]
fn seed_override_changes_noisy_runs_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("fig5-hh-noisy-b");
    let mut y = Vec::new();
    for seed in ["1", "1", "2"] {
        let out = cli(&["--seed", seed, "--dt", "0.01", "simulate", cfg.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        y.push(fs::read(dir.path().join("fig5-hh-noisy-b/trajectory.csv")).unwrap());
    }
    assert_eq!(y[0], y[1]);
    assert_ne!(y[0], y[2]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cli(&["simulate", "/no/such/file.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nt_end_ms = -1\n").unwrap();
    assert_eq!(cli(&["simulate", bad.to_str().unwrap()], dir.path()).status.code(), Some(1));

    assert_eq!(cli(&["no-such-command"], dir.path()).status.code(), Some(1));

    // a step far too large for the covariance update is a numerical failure
    let cfg = scenario_path("fig4-hh-noiseless");
    let out = cli(&["--dt", "0.5", "estimate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive definite"));
}

#[test]
fn shipped_configs_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ScenarioConfig::load(&path).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        n += 1;
    }
    assert!(n >= 6);
}

#[test]
fn summary_from_files_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::load(&scenario_path("fig4-hh-noiseless")).unwrap();
    cfg.t_end_ms = 60.0;
    cfg.diagnostics = None;
    let r = run_scenario(&cfg, RunMode::Estimate, Some(dir.path())).unwrap();
    let mut from_disk = summary_from_files(&cfg, &dir.path().join(&cfg.name)).unwrap();
    from_disk.wall_time_ms = r.summary.wall_time_ms;
    from_disk.diagnostics_path = r.summary.diagnostics_path.clone();
    assert_eq!(from_disk, r.summary);
}
