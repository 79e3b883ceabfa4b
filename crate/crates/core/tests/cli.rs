//! End-to-end runs of the `wii` binary on a miniature configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use wii_core::config::{canonical_json, RunConfig};
use wii_core::dataset::{load_dataset, GenConfig};
use wii_core::nn::{LayerSpec, NetworkConfig};

fn wii(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wii"));
    cmd.args(args).env_remove("WII_OUT_DIR").env_remove("WII_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = wii(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn mini_config() -> RunConfig {
    use LayerSpec::*;
    let mut c = RunConfig::desk();
    c.generation = GenConfig {
        snapshots_per_class_snr: 2,
        snr_grid: vec![-10.0, 20.0],
        multi_total: 60,
        ..GenConfig::desk()
    };
    c.network = NetworkConfig {
        layers: vec![
            Conv { maps: 2, kernel: [2, 3] },
            Relu,
            Flatten,
            Dense { units: 15 },
            Sigmoid,
        ],
        ..NetworkConfig::desk()
    };
    c.training.epochs = 2;
    c.training.batch_size = 16;
    c
}

struct Run {
    dir: PathBuf,
}

impl Run {
    fn p(&self, name: &str) -> String {
        self.dir.join(name).to_str().unwrap().to_string()
    }
}

/// Runs the whole pipeline in `dir` and returns the paths involved.
fn pipeline(dir: &Path, threads: &str) -> Run {
    let r = Run { dir: dir.to_path_buf() };
    fs::write(dir.join("cfg.json"), canonical_json(&mini_config()).unwrap()).unwrap();
    let cfg = r.p("cfg.json");
    let c = ["--threads", threads, "--config", cfg.as_str()];
    ok(&[&["gen-single"], &c[..], &["--out", &r.p("single.wiid")]].concat());
    ok(&[&["gen-multi"], &c[..], &["--single", &r.p("single.wiid"), "--out", &r.p("multi.wiid")]].concat());
    ok(&[&["split"], &c[..], &["--in", &r.p("multi.wiid"), "--out", &r.p("split")]].concat());
    ok(&[
        &["train"],
        &c[..],
        &["--train", &r.p("split/train.wiid"), "--val", &r.p("split/val.wiid"), "--out", &r.p("model.wiim")],
    ]
    .concat());
    ok(&[&["eval"], &c[..], &["--model", &r.p("model.wiim"), "--data", &r.p("split/val.wiid"), "--out", &r.p("eval.json")]]
        .concat());
    ok(&[
        &["compare-single"],
        &c[..],
        &["--model", &r.p("model.wiim"), "--data", &r.p("single.wiid"), "--out", &r.p("snr.csv")],
    ]
    .concat());
    ok(&[&["report"], &c[..], &["--model", &r.p("model.wiim"), "--data", &r.p("split/val.wiid"), "--out", &r.p("report")]]
        .concat());
    r
}

const ARTIFACTS: &[&str] = &[
    "single.wiid",
    "single.wiid.json",
    "single.wiid.manifest.json",
    "multi.wiid",
    "multi.wiid.json",
    "split/train.wiid",
    "split/val.wiid",
    "split/val.wiid.json",
    "split/manifest.json",
    "model.wiim",
    "model.wiim.manifest.json",
    "eval.json",
    "eval.json.manifest.json",
    "snr.csv",
    "report/groups.json",
    "report/groups.csv",
    "report/tech_curves.csv",
    "report/summary.json",
    "report/manifest.json",
];

#[test]
fn pipeline_is_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline(a.path(), "1");
    let rb = pipeline(b.path(), "3");
    for name in ARTIFACTS {
        let x = fs::read(ra.dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let y = fs::read(rb.dir.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }

    let single = load_dataset(&ra.dir.join("single.wiid")).unwrap();
    assert_eq!(single.len(), 15 * 2 * 2);
    let multi = load_dataset(&ra.dir.join("multi.wiid")).unwrap();
    assert_eq!(multi.count_by_interferers()[1..], [10; 6]);
    let train = load_dataset(&ra.dir.join("split/train.wiid")).unwrap();
    let val = load_dataset(&ra.dir.join("split/val.wiid")).unwrap();
    assert_eq!(train.len() + val.len(), 60);
    assert_eq!(val.len(), 12);

    let m: Value = serde_json::from_str(&fs::read_to_string(ra.dir.join("model.wiim.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "train");
    assert_eq!(m["config"]["training"]["epochs"], 2);
    assert!(m["inputs"]["train.wiid"].is_string() && m["outputs"]["model.wiim"].is_string());

    let summary: Value = serde_json::from_str(&fs::read_to_string(ra.dir.join("report/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["records"], 12);
    assert_eq!(summary["by_class"].as_array().unwrap().len(), 15);
    let snr = fs::read_to_string(ra.dir.join("snr.csv")).unwrap();
    assert_eq!(snr.lines().count(), 1 + 3 * 2);
}

#[test]
fn eval_groupings_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let r = pipeline(dir.path(), "1");
    let cfg = r.p("cfg.json");
    let base = ["eval", "--config", cfg.as_str(), "--model", &r.p("model.wiim"), "--data", &r.p("split/val.wiid")];
    let csv_out = r.p("by_n.csv");
    ok(&[&base[..], &["--group-by", "n", "--format", "csv", "--out", &csv_out]].concat());
    let csv = fs::read_to_string(&csv_out).unwrap();
    assert!(csv.lines().count() >= 2);
    let json_out = r.p("by_class.json");
    ok(&[&base[..], &["--group-by", "class", "--threshold", "0.7", "--no-mask", "--out", &json_out]].concat());
    let v: Value = serde_json::from_str(&fs::read_to_string(&json_out).unwrap()).unwrap();
    assert_eq!(v["mask_utilized"], false);
    assert_eq!(v["groups"].as_array().unwrap().len(), 15);
}

#[test]
fn features_dump_and_out_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let r = Run { dir: dir.path().to_path_buf() };
    fs::write(dir.path().join("cfg.json"), canonical_json(&mini_config()).unwrap()).unwrap();
    let out = wii(&["gen-single", "--config", &r.p("cfg.json"), "--out", "rel.wiid"], &[("WII_OUT_DIR", dir.path())]);
    assert!(out.status.success());
    assert!(dir.path().join("rel.wiid").is_file());
    let csv = ok(&["features", "--in", &r.p("rel.wiid"), "--index", "5"]);
    assert_eq!(csv.lines().count(), 129);
    assert_eq!(csv.lines().next().unwrap(), "row,re,im");
    let out = wii(&["features", "--in", &r.p("rel.wiid"), "--index", "60"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let r = Run { dir: dir.path().to_path_buf() };
    let code = |args: &[&str]| wii(args, &[]).status.code().unwrap();
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["gen-single", "--preset", "enormous", "--out", &r.p("x")]), 3);
    assert_eq!(code(&["split", "--in", &r.p("missing.wiid"), "--out", &r.p("s")]), 4);
    fs::write(dir.path().join("bad.wiid"), b"WIID garbage").unwrap();
    assert_eq!(code(&["split", "--in", &r.p("bad.wiid"), "--out", &r.p("s")]), 5);
    assert!(!dir.path().join("s").exists(), "no output on failed validation");
    let stderr = String::from_utf8(wii(&["split", "--in", &r.p("bad.wiid"), "--out", &r.p("s")], &[]).stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
}
