//! End-to-end checks of the command-line surface: exit codes, artifact
//! presence, and the report round trip.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scarlab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("scarlab_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn quick_config(dir: &std::path::Path) -> PathBuf {
    let path = dir.join("config.json");
    let cfg = serde_json::json!({
        "h_list": [0.025],
        "nonres_grid": 101,
        "quad_action": 512,
        "t_order": 6,
    });
    // overlay onto defaults through the flat format path: write JSON with
    // only overrides is not accepted (serde(default) fills the rest), so a
    // full default config is produced first
    let mut full: serde_json::Value =
        serde_json::to_value(scarlab::config::ExperimentConfig::default()).unwrap();
    for (k, v) in cfg.as_object().unwrap() {
        full[k] = v.clone();
    }
    std::fs::write(&path, serde_json::to_string_pretty(&full).unwrap()).unwrap();
    path
}

#[test]
fn invalid_config_exits_2() {
    let dir = temp_dir("bad_cfg");
    let path = dir.join("bad.json");
    let mut full: serde_json::Value =
        serde_json::to_value(scarlab::config::ExperimentConfig::default()).unwrap();
    full["gamma"] = serde_json::json!(2.0); // violates gamma > 7/4 + 2d
    std::fs::write(&path, serde_json::to_string(&full).unwrap()).unwrap();
    let status = bin()
        .args(["scar", "run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn scar_run_and_report_round_trip() {
    let dir = temp_dir("run_report");
    let cfg = quick_config(&dir);
    let out = dir.join("out");
    let status = bin()
        .args(["scar", "run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["manifest.json", "summary.json", "windows_0.csv", "nonres.csv"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report = bin().args(["report", "--out"]).arg(&out).output().unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("remainder slopes"));
    assert!(text.contains("complete = true"));
}

#[test]
fn nonres_scan_writes_csv() {
    let dir = temp_dir("nonres");
    let status = bin()
        .args([
            "nonres", "scan", "--dim", "2", "--delta", "power", "--tau", "4.5", "--kappa", "0.05",
            "--ktest", "6", "--grid", "41", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(dir.join("nonres.csv")).unwrap();
    assert!(text.starts_with("index,i0,i1,pass,margin,worst_mode"));
    assert!(text.lines().count() > 1000);
}

#[test]
fn bnf_run_reports_orders() {
    let dir = temp_dir("bnf");
    let cfg = quick_config(&dir);
    let output = bin()
        .args(["bnf", "run", "--rmax", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(dir.join("bnf.jsonl").is_file());
    assert!(dir.join("orders.csv").is_file());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("measured slope"));
}

#[test]
fn spectrum_emits_eigenband() {
    let dir = temp_dir("spectrum");
    let cfg = quick_config(&dir);
    let status = bin()
        .args(["spectrum", "--h", "0.025", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(dir.join("eigenband.jsonl")).unwrap();
    assert!(text.lines().next().unwrap().contains("eigen_band"));
}

#[test]
fn quasimodes_emit_jsonl() {
    let dir = temp_dir("quasimodes");
    let cfg = quick_config(&dir);
    let status = bin()
        .args(["quasimodes", "--h", "0.025", "--l", "1.0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(dir.join("quasimodes.jsonl")).unwrap();
    assert!(text.lines().count() > 3);
}
