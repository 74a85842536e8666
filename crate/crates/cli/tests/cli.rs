use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polytune(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polytune")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_reports_a_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&polytune(&["analyze", "--gemm", "4,4,4"], dir.path()));
    let d2 = v["reuses"].as_array().unwrap().iter().find(|r| r["name"] == "d2").unwrap();
    assert_eq!(d2["array"], "A");
    assert_eq!((d2["ws_min"].as_u64(), d2["ws_max"].as_u64()), (Some(11), Some(21)));
    assert_eq!(d2["ws_min_formula"], "2K + 3");
    assert_eq!(d2["ws_max_formula"], "NK + N + 1");
}

#[test]
fn analyze_notes_empty_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&polytune(&["analyze", "--gemm", "4x4x1"], dir.path()));
    let empty = v["empty"].as_array().unwrap();
    assert!(empty.iter().any(|e| e["array"] == "C" && e["note"].as_str().unwrap().contains("single iteration")));
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"top_fraction": 0.1, "unknown": 1}"#).unwrap();
    let out = polytune(&["--config", cfg.to_str().unwrap(), "pipeline"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&cfg, r#"{"top_fraction": 1.5}"#).unwrap();
    let out = polytune(&["--config", cfg.to_str().unwrap(), "pipeline"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("polytune-out").exists());
}

#[test]
fn codegen_emits_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let out = polytune(&["codegen", "--spec", "2,32,1", "--size", "64,64,64"], dir.path());
    assert!(out.status.success());
    let src = String::from_utf8(out.stdout).unwrap();
    assert!(src.contains("_mm512_fmadd_ps"));

    let out = polytune(&["codegen", "--spec", "2,32,1", "--size", "5,17,3", "--scalar"], dir.path());
    assert!(String::from_utf8(out.stdout).unwrap().contains("N = 17"));

    let out = polytune(&["codegen", "--spec", "8,64,8", "--size", "64,64,64"], dir.path());
    assert_eq!(out.status.code(), Some(3), "over-budget spec is a stage failure");
}

#[test]
fn variants_train_rank_flow() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = polytune(&["--out", "v", "variants", "--size", "256,256,256", "--max", "40"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: Value = serde_json::from_slice(&std::fs::read(p.join("v/variants.json")).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 40);

    let summary = stdout_json(&polytune(&["--out", "m", "train-ranker", "v/variants.json"], p));
    assert_eq!(summary["variants"], 40);
    assert!(p.join("m/model.json").exists());

    let ranking = stdout_json(&polytune(&["rank", "--model", "m/model.json", "v/variants.json"], p));
    assert_eq!(ranking["ranking"]["entries"].as_array().unwrap().len(), 40);
    assert_eq!(ranking["top"].as_array().unwrap().len(), 4);
}

#[test]
fn tune_writes_log_and_policy() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&polytune(&["--out", "t", "tune", "--size", "34,34,34"], dir.path()));
    assert!(v["best_performance"].as_f64().unwrap() > 0.0);
    let log = std::fs::read_to_string(dir.path().join("t/rl_log.jsonl")).unwrap();
    assert_eq!(log.lines().count() as u64, v["steps"].as_u64().unwrap());
    assert!(dir.path().join("t/policy.json").exists());
}

#[test]
fn bench_reports_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&polytune(&["bench", "--spec", "4,32,1", "--size", "128,128,128"], dir.path()));
    assert!(v["speedup"].as_f64().unwrap() > 1.0);
}

#[test]
fn small_pipeline_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"problems": [[96, 128, 64]], "max_variants": 20, "ranker": {"epochs": 10},
            "rl": {"episodes": 20, "ladders": {"ui": [1, 2], "uj": [16, 32], "uk": [1, 2]}}}"#,
    )
    .unwrap();
    let out = polytune(&["--config", "cfg.json", "--out", "run", "pipeline"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("96x128x64: "));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["problems"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("run/config.json").exists());
}
