use std::path::Path;
use std::process::Command;

use lnslab::config::{DataKind, ExperimentConfig, Scenario};
use lnslab::scenarios::run_stability;
use lnslab::verify::{run_verify, Faults};

fn lnslab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lnslab")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    assert_eq!(lnslab(&["stability", "--config", &cfg]).0, 2);
    let cfg = write_config(dir.path(), "n = 7\n");
    assert_eq!(lnslab(&["norms", "--config", &cfg]).0, 2);
}

#[test]
fn gate_refusal_exits_2_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 32\nr_cut = 1.0\neps1 = 0.01\n");
    let out = dir.path().join("out");
    assert_eq!(lnslab(&["stability", "--config", &cfg, "--out", out.to_str().unwrap()]).0, 2);
    assert!(!out.join("norms.csv").exists());
}

#[test]
fn norms_subcommand_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 16\nbox_len = 8.0\n");
    let (code, stdout) = lnslab(&["norms", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["weak_l3"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_datum_is_trivially_stable() {
    let mut cfg = ExperimentConfig::defaults(Scenario::Stability);
    cfg.n = 32;
    cfg.r_cut = 1.0;
    cfg.t_end = 1.0;
    cfg.data = DataKind::Zero;
    let r = run_stability(&cfg, None).unwrap();
    assert!(r.zero_data && r.pass);
    assert!(r.l3.series.iter().all(|p| p.1 == 0.0));
}

#[test]
fn verify_is_deterministic_and_catches_the_fault() {
    let cfg = ExperimentConfig::defaults(Scenario::Verify);
    let a = run_verify(&cfg, Faults::default()).unwrap();
    let b = run_verify(&cfg, Faults::default()).unwrap();
    assert!(a.pass, "{:?}", a.failed());
    assert_eq!(a.to_json(), b.to_json());
    let bad = run_verify(&cfg, Faults { landau_sign_flip: true }).unwrap();
    let failed: Vec<&str> = bad.failed().iter().map(|i| i.name).collect();
    assert!(failed.contains(&"stationary_residual_order"), "{failed:?}");
    assert!(bad.failed().iter().all(|i| i.module == "landau"));
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = lnslab(&["verify", "--fault-landau-sign", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(dir.path().join("verify.json").exists());
}
