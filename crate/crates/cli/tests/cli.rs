use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const LINEAR_NN: &str = r#"{
  "model": { "g": { "tag": "linear" }, "law": { "kind": "iid_uniform", "a0": 1.0, "a1": 2.0 } }
}"#;

fn zrp(dir: &Path, kind: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{kind}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{kind}-{}", extra.join("_").replace(['-', '/'], "")));
    let output = Command::new(env!("CARGO_BIN_EXE_zrp"))
        .arg(kind)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_passes_for_linear_nearest_neighbour() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = zrp(tmp.path(), "check", LINEAR_NN, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("hypotheses.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);
    for h in ["h1", "h2", "h3", "h4"] {
        assert_eq!(report["report"][h]["pass"], true, "{h}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for key in ["config_hash", "seed", "tool_version", "start_time", "end_time"] {
        assert!(!manifest[key].is_null(), "manifest lacks {key}");
    }
    assert_eq!(manifest["kind"], "check");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn totally_asymmetric_kernel_is_a_hypothesis_violation() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{
      "model": { "g": { "tag": "linear" }, "kernel": { "1": 1.0 },
                 "law": { "kind": "iid_uniform", "a0": 1.0, "a1": 2.0 } }
    }"#;
    let (o, out) = zrp(tmp.path(), "check", cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("H1"), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("hypotheses.json")).unwrap()).unwrap();
    assert_eq!(report["failed"], serde_json::json!(["H1"]));

    let (o, _) = zrp(tmp.path(), "check", cfg, &["--allow-violations"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (r#"{ "model": { "g": { "tag": "linear" }, "law": { "kind": "homogeneous" }, "rhoo": 1 } }"#, "rhoo"),
        (r#"{ "model": { "g": { "tag": "linear" } } }"#, "law"),
        (
            r#"{ "model": { "g": { "tag": "linear" }, "law": { "kind": "iid_uniform", "a0": 2.0, "a1": 1.0 } } }"#,
            "model.law",
        ),
        (
            r#"{ "model": { "g": { "tag": "linear" }, "law": { "kind": "homogeneous" } }, "numerics": { "horizon": -1 } }"#,
            "numerics.horizon",
        ),
        (r#"{ "kind": "girsanov", "model": { "g": { "tag": "linear" }, "law": { "kind": "homogeneous" } } }"#, "kind"),
    ];
    for (cfg, key) in cases {
        let (o, _) = zrp(tmp.path(), "check", cfg, &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "{cfg}: {}", stderr(&o));
    }
    let (o, _) = zrp(tmp.path(), "girsanov", LINEAR_NN, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`h`"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_and_bad_kind_exit_with_config_error() {
    let missing =
        Command::new(env!("CARGO_BIN_EXE_zrp")).args(["check", "--config", "/nonexistent/zrp.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let bad_kind = Command::new(env!("CARGO_BIN_EXE_zrp")).args(["nonsense", "--config", "x.json"]).output().unwrap();
    assert_eq!(bad_kind.status.code(), Some(2));
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_config_and_seed_give_identical_csvs() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{
      "model": { "g": { "tag": "power", "exponent": 0.5 }, "law": { "kind": "iid_uniform", "a0": 1.0, "a1": 2.0 },
                 "gamma": { "kind": "bump", "amplitude": 0.5, "center": 0.5, "radius": 0.3 } },
      "numerics": { "ns": [16, 32], "horizon": 0.02, "snapshots": 3, "bins": 8 },
      "replication": { "replicas": 100, "environment": "annealed" },
      "ldscan": { "window": [0.25, 0.75], "threshold": 0.55 }
    }"#;
    let (a, out_a) = zrp(tmp.path(), "ldscan", cfg, &["--seed", "9"]);
    let (b, out_b) = zrp(tmp.path(), "ldscan", cfg, &["--seed", "9", "--threads", "1"]);
    let (c, out_c) = zrp(tmp.path(), "ldscan", cfg, &["--seed", "10"]);
    for o in [&a, &b, &c] {
        assert_eq!(o.status.code(), Some(0), "{}", stderr(o));
    }
    let (fa, fb, fc) = (csv_files(&out_a), csv_files(&out_b), csv_files(&out_c));
    assert_eq!(fa.len(), 1);
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);
}

#[test]
fn equilibrium_needs_a_fixed_medium() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{
      "model": { "g": { "tag": "linear" }, "law": { "kind": "iid_uniform", "a0": 1.0, "a1": 2.0 } },
      "numerics": { "ns": [16], "bins": 8 },
      "replication": { "environment": "annealed" }
    }"#;
    let (o, _) = zrp(tmp.path(), "equilibrium", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replication.environment"), "{}", stderr(&o));
}

#[test]
fn hydro_compare_writes_profiles_and_a_summary_row_per_scale() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{
      "model": { "g": { "tag": "linear" }, "law": { "kind": "homogeneous" },
                 "gamma": { "kind": "sine", "amplitude": 0.5 } },
      "numerics": { "ns": [16, 32], "cells": 64, "horizon": 0.02, "snapshots": 2, "bins": 8 },
      "replication": { "replicas": 20, "master_seed": 2 }
    }"#;
    let (o, out) = zrp(tmp.path(), "hydro_compare", cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let names: Vec<String> = csv_files(&out).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["hydro.csv", "hydro_compare_summary.csv", "profiles_N16.csv", "profiles_N32.csv"]);

    let mut summary = csv::Reader::from_path(out.join("hydro_compare_summary.csv")).unwrap();
    assert_eq!(summary.headers().unwrap(), vec!["n", "replicas", "bins", "time", "l1_error"]);
    let rows: Vec<csv::StringRecord> = summary.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((&rows[0][0], &rows[1][0]), ("16", "32"));
    for r in &rows {
        let l1: f64 = r[4].parse().unwrap();
        assert!(l1.is_finite() && l1 >= 0.0);
    }
    let mut profiles = csv::Reader::from_path(out.join("profiles_N16.csv")).unwrap();
    assert_eq!(profiles.headers().unwrap(), vec!["replica", "time", "grid_index", "density"]);
    // 20 replicas × snapshots {0, T/2, T} × 8 bins.
    assert_eq!(profiles.records().count(), 480);

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> =
        manifest["outputs"].as_array().unwrap().iter().map(|e| e["file"].as_str().unwrap()).collect();
    for n in &names {
        assert!(listed.contains(&n.as_str()), "{n} missing from the manifest");
    }

    let (again, out2) = zrp(tmp.path(), "hydro_compare", cfg, &["--threads", "1"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(csv_files(&out), csv_files(&out2));
}

#[test]
fn every_kind_runs_on_a_small_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{
      "model": { "g": { "tag": "linear" }, "law": { "kind": "iid_uniform", "a0": 1.0, "a1": 2.0 },
                 "gamma": { "kind": "bump", "amplitude": 0.5, "center": 0.5, "radius": 0.3 } },
      "numerics": { "ns": [16], "cells": 64, "horizon": 0.02, "snapshots": 2, "bins": 8 },
      "replication": { "replicas": 100, "master_seed": 1 },
      "h": [{ "coefficient": 0.5, "center": 0.5, "radius": 0.3 }],
      "superexp": { "epsilons": [0.2] },
      "ldscan": { "window": [0.25, 0.75], "threshold": 0.6, "tilted": true },
      "rate_estimate": { "window": [0.1, 0.9], "splines": 6, "outputs": 10, "max_iters": 200, "restarts": 1 }
    }"#;
    let expect = [
        ("equilibrium", "equilibrium_summary.csv"),
        ("girsanov", "girsanov_summary.csv"),
        ("superexp", "probe.csv"),
        ("ldscan", "scan.csv"),
        ("rate_estimate", "rate_estimate.json"),
    ];
    for (kind, file) in expect {
        let (o, out) = zrp(tmp.path(), kind, cfg, &[]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", stderr(&o));
        assert!(out.join(file).exists(), "{kind} did not write {file}");
    }
}
