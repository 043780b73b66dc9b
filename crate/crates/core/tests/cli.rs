use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use speckle_ica::optics::{Modality, OpticsConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_speckle-ica"))
}

fn write_config(dir: &Path, name: &str, value: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn theorem_sweep_run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "theorem.json", &json!({"schema_version": 1, "scenario": "theorem_sweep"}));
    let out_dir = dir.path().join("out");
    let out = bin().args(["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["scenario"], "theorem_sweep");
    let resolved = std::fs::read(out_dir.join("config.resolved.json")).unwrap();
    assert_eq!(manifest["config_hash"], speckle_ica::experiment::artifacts::sha256_hex(&resolved));

    let mut reader = csv::Reader::from_path(out_dir.join("theorem.csv")).unwrap();
    let rows = reader.records().count();
    assert_eq!(rows, 60);
}

#[test]
fn resolved_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.json", &json!({"schema_version": 1, "scenario": "theorem_sweep", "theorem": {"correlations": [0.1], "noise_sigmas": [0.0], "seeds": 2, "samples": 5000, "sources": 3, "seed": 4}}));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&bin().args(["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).output().unwrap()), 0);
    let again = a.join("config.resolved.json");
    assert_eq!(code(&bin().args(["run", again.to_str().unwrap(), "--out", b.to_str().unwrap()]).output().unwrap()), 0);
    assert_eq!(std::fs::read(a.join("theorem.csv")).unwrap(), std::fs::read(b.join("theorem.csv")).unwrap());
    assert_eq!(read_json(&a.join("manifest.json"))["config_hash"], read_json(&b.join("manifest.json"))["config_hash"]);
}

#[test]
fn validate_accepts_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for scenario in ["shg_v", "shg_u", "linear_u", "theorem_sweep", "diagnostics"] {
        let cfg = write_config(dir.path(), "c.json", &json!({"schema_version": 1, "scenario": scenario}));
        let out = bin().args(["validate", cfg.to_str().unwrap()]).output().unwrap();
        assert_eq!(code(&out), 0, "{scenario}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn validate_rejects_unresolved_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut optics = serde_json::to_value(OpticsConfig::desk(Modality::Linear, 1.5)).unwrap();
    optics["grid_points"] = json!(32);
    let cfg = write_config(dir.path(), "c.json", &json!({"schema_version": 1, "scenario": "linear_u", "optics": optics}));
    let out = bin().args(["validate", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&out), 2);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["physics_violations"].as_array().unwrap().is_empty());
}

#[test]
fn validate_rejects_impossible_packing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({"schema_version": 1, "scenario": "shg_u", "scene": {"count": 50, "window": 1.0}}));
    let out = bin().args(["validate", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn malformed_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        json!({"schema_version": 1, "scenario": "shg_u", "bogus": 1}),
        json!({"schema_version": 9, "scenario": "shg_u"}),
        json!({"schema_version": 1, "scenario": "nope"}),
        json!({"schema_version": 1, "scenario": "shg_u", "imaging": {"eta_f": -1.0}}),
    ];
    for (i, c) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), c);
        let out = bin().args(["run", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]).output().unwrap();
        assert_eq!(code(&out), 2, "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = bin().args(["validate", dir.path().join("missing.json").to_str().unwrap()]).output().unwrap();
    assert_ne!(code(&out), 0);
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.json", &json!({"schema_version": 1, "scenario": "theorem_sweep", "theorem": {"correlations": [0.1], "noise_sigmas": [0.0], "seeds": 1, "samples": 5000, "sources": 3, "seed": 1}}));
    let out_dir = dir.path().join("sweep");
    let out = bin()
        .args(["sweep", cfg.to_str().unwrap(), "--param", "theorem.samples", "--values", "4000,6000", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["4000", "6000"] {
        let m = read_json(&out_dir.join(format!("theorem.samples={v}")).join("manifest.json"));
        assert_eq!(m["config"]["theorem"]["samples"], json!(v.parse::<u64>().unwrap()));
    }
    let mut reader = csv::Reader::from_path(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(reader.records().count(), 2);
}

#[test]
fn small_imaging_run_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "img.json",
        &json!({"schema_version": 1, "scenario": "shg_u", "scene": {"count": 2, "window": 4.0}, "realizations": 120, "repeats": 1, "green_model": "rgo"}),
    );
    let out_dir = dir.path().join("img");
    let out = bin().args(["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "3"]).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = out_dir.join("run_00");
    for f in ["improved.pgm", "dort.pgm", "improved_peaks.csv", "dort_peaks.csv", "scene.csv", "singular_values.csv"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let (cols, rows, _) = speckle_ica::experiment::artifacts::read_pgm(&run.join("improved.pgm")).unwrap();
    assert_eq!(cols, rows);
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["config"]["seed"], 3);
    assert!(manifest["derived"]["image_pixel"].as_f64().unwrap() > 0.0);
    let mut reader = csv::Reader::from_path(out_dir.join("runs.csv")).unwrap();
    assert_eq!(reader.records().count(), 1);
}
