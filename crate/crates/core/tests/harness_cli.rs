use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use chodim::harness::{verify_manifest, RunManifest, MANIFEST_NAME};

fn repo_config(name: &str) -> Value {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_chodim"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--serial")
        .status()
        .unwrap();
    status.code().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

fn small_cubic() -> Value {
    let mut c = repo_config("cubic.json");
    c["grid"]["modes_per_axis"] = 32.into();
    c["integrate"]["t_transient"] = 2.0.into();
    c["integrate"]["n_samples"] = 2.into();
    c
}

#[test]
fn simulate_is_reproducible_and_the_manifest_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_cubic());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["simulate"], &cfg, &a), 0);
    assert_eq!(run(&["simulate"], &cfg, &b), 0);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert!(!ma.files.is_empty());
    assert_eq!(ma.files.iter().map(|f| (&f.path, &f.sha256)).collect::<Vec<_>>(), mb.files.iter().map(|f| (&f.path, &f.sha256)).collect::<Vec<_>>());
    assert!(verify_manifest(&a).unwrap().is_empty());
    assert!(ma.files.iter().any(|f| f.path == "energy.csv"));
    assert!(ma.files.iter().any(|f| f.path == "state_001.bin"));

    fs::write(a.join("energy.csv"), "tampered").unwrap();
    assert_eq!(verify_manifest(&a).unwrap(), vec!["energy.csv".to_string()]);
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_cubic());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["simulate"], &cfg, &a), 0);
    let status = Command::new(env!("CARGO_BIN_EXE_chodim"))
        .args(["simulate", "--serial", "--seed", "99", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(manifest(&b).config.seed, 99);
    assert_ne!(fs::read(a.join("energy.csv")).unwrap(), fs::read(b.join("energy.csv")).unwrap());
}

#[test]
fn unforced_run_decays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.json", &repo_config("decay.json"));
    let out = tmp.path().join("out");
    assert_eq!(run(&["simulate"], &cfg, &out), 0);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("simulate.json")).unwrap()).unwrap();
    assert!(summary["final_energy_space_norm"].as_f64().unwrap() < 1e-6);
}

#[test]
fn config_errors_exit_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = small_cubic();
    bad["integrate"]["dt"] = 0.0.into();
    let cfg = write_config(tmp.path(), "bad.json", &bad);
    let out = tmp.path().join("out");
    assert_eq!(run(&["simulate"], &cfg, &out), 1);
    assert!(!out.exists());

    let mut typo = small_cubic();
    typo["metric"] = serde_json::json!({ "detla": 0.1 });
    let cfg = write_config(tmp.path(), "typo.json", &typo);
    assert_eq!(run(&["dimension"], &cfg, &out), 1);
    assert!(!out.exists());
}

#[test]
fn energy_check_catches_disabled_dealiasing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = repo_config("cubic.json");
    let cfg = write_config(tmp.path(), "ok.json", &c);
    let out = tmp.path().join("ok");
    assert_eq!(run(&["check", "energy"], &cfg, &out), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("check_energy.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));

    c["grid"]["dealias"] = false.into();
    let cfg = write_config(tmp.path(), "aliased.json", &c);
    let out = tmp.path().join("aliased");
    assert_eq!(run(&["check", "energy"], &cfg, &out), 3);
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn residual_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_cubic());
    for kind in ["tangent", "liouville", "metric-identity"] {
        let out = tmp.path().join(kind);
        assert_eq!(run(&["check", kind], &cfg, &out), 0, "{kind}");
    }
}

#[test]
fn dimension_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut lin = repo_config("linear.json");
    lin["grid"]["modes_per_axis"] = 32.into();
    let cfg = write_config(tmp.path(), "lin.json", &lin);
    let out = tmp.path().join("lin");
    assert_eq!(run(&["dimension"], &cfg, &out), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("dimension.json")).unwrap()).unwrap();
    assert_eq!(report["chosen_d"], Value::from(1));
    assert!(fs::read_to_string(out.join("dimension.csv")).unwrap().starts_with("time,trace_1,"));

    // without cross terms the splitting has no dissipative part on ker K
    lin["grid"]["modes_per_axis"] = 64.into();
    lin["metric"] = serde_json::json!({ "delta": 0.0, "lweight": 0.0 });
    let cfg = write_config(tmp.path(), "flat.json", &lin);
    let out = tmp.path().join("flat");
    assert_eq!(run(&["dimension"], &cfg, &out), 3);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("dimension.json")).unwrap()).unwrap();
    assert!(report["splitting_failure"].is_string());

    // too short to reach ω ≤ ½
    let mut short = small_cubic();
    short["liouville"]["T_contract"] = 0.2.into();
    let cfg = write_config(tmp.path(), "short.json", &short);
    assert_eq!(run(&["dimension"], &cfg, &tmp.path().join("short")), 2);
}

#[test]
fn lyapunov_writes_the_exponent_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_cubic();
    c["lyapunov"] = serde_json::json!({ "t_run": 60.0, "n_exponents": 4 });
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = tmp.path().join("ly");
    let code = run(&["lyapunov"], &cfg, &out);
    assert!(code == 0 || code == 2, "{code}");
    let csv = fs::read_to_string(out.join("lyapunov.csv")).unwrap();
    assert!(csv.starts_with("index,exponent\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn blow_up_exits_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_cubic();
    c["integrate"]["dt"] = 0.5.into();
    c["integrate"]["initial_amplitude"] = 200.0.into();
    let cfg = write_config(tmp.path(), "c.json", &c);
    let out = tmp.path().join("boom");
    assert_eq!(run(&["simulate"], &cfg, &out), 4);
    let err: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["exit_code"], Value::from(4));
    assert!(err["time"].as_f64().is_some());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("st");
    let status = Command::new(env!("CARGO_BIN_EXE_chodim")).args(["selftest", "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("selftest.json").exists());
}
