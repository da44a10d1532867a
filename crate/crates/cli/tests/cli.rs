use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use zonescan_core::model::DenseLayer;
use zonescan_core::{entropy, save_model, scan, Activation, MlpModel, ScanConfig};

fn zonescan(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zonescan"))
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

fn ok(cwd: &Path, args: &[&str]) {
    let out = zonescan(cwd, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn result(path: impl AsRef<Path>) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["result"].clone()
}

fn save(dir: &Path, name: &str, model: &MlpModel) -> PathBuf {
    let p = dir.join(name);
    save_model(model, &p).unwrap();
    p
}

fn half_plane() -> MlpModel {
    let layer = DenseLayer::new(vec![vec![3.0, -3.0], vec![-3.0, 3.0]], vec![0.0, 0.0], Activation::Identity).unwrap();
    MlpModel::new(vec![layer]).unwrap()
}

#[test]
fn constant_model_scans_to_one() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "m.json", &MlpModel::zeros(&[2, 3]).unwrap());
    ok(dir.path(), &["scan", "--model", "m.json", "--point", "0.2,0.9", "--radius", "0.3", "--samples", "500"]);
    let index = result(dir.path().join("scan.json"))["index"].as_f64().unwrap();
    assert!((index - 1.0).abs() < 1e-12, "{index}");

    ok(dir.path(), &["sweep", "--model", "m.json", "--point", "0.2,0.9", "--samples", "200"]);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 21);
    for row in rows {
        let index: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((index - 1.0).abs() < 1e-12, "{row}");
    }

    ok(dir.path(), &["surface", "--model", "m.json", "--samples", "1000"]);
    assert_eq!(result(dir.path().join("surface.json"))["fractions"], serde_json::json!([1.0, 0.0, 0.0]));
}

#[test]
fn scan_matches_library_and_direct_inference() {
    let dir = tempfile::tempdir().unwrap();
    let model = MlpModel::init(&[3, 8, 4], Activation::Sigmoid, 4).unwrap();
    save(dir.path(), "m.json", &model);
    let x = [0.3, 0.6, 0.1];

    ok(dir.path(), &["--seed", "17", "scan", "--model", "m.json", "--point", "0.3,0.6,0.1", "--radius", "0.2", "--samples", "3000"]);
    let lib = scan(&model, &x, &ScanConfig::new(0.2, 3000, 17)).unwrap();
    let cli = result(dir.path().join("scan.json"));
    assert_eq!(cli["index"].as_f64().unwrap().to_bits(), lib.index_value.to_bits());
    assert_eq!(cli["std_dev"].as_f64().unwrap().to_bits(), lib.std_dev.to_bits());

    ok(dir.path(), &["scan", "--model", "m.json", "--point", "0.3,0.6,0.1", "--radius", "0"]);
    let direct = entropy(model.forward(&x).unwrap().values()).unwrap();
    let v = result(dir.path().join("scan.json"));
    assert!((v["index"].as_f64().unwrap() - direct).abs() < 1e-12);
    assert!((v["entropy_at_point"].as_f64().unwrap() - direct).abs() < 1e-15);
}

#[test]
fn half_plane_surface_is_even() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "m.json", &half_plane());
    ok(dir.path(), &["surface", "--model", "m.json"]);
    let f = result(dir.path().join("surface.json"))["fractions"].clone();
    let f: Vec<f64> = serde_json::from_value(f).unwrap();
    assert!((f[0] - 0.5).abs() < 0.01 && (f[1] - 0.5).abs() < 0.01, "{f:?}");
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn train_on_blobs_is_accurate_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(dir.path(), &["--seed", "3", "--out-dir", out, "train", "--data", "blobs:n=800", "--epochs", "30"]);
    }
    let a = std::fs::read(dir.path().join("a/model.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/model.json")).unwrap());
    assert!(result(dir.path().join("a/train_report.json"))["train_accuracy"].as_f64().unwrap() >= 0.95);
    let history = std::fs::read_to_string(dir.path().join("a/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 31);
}

#[test]
fn config_file_supplies_options() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "m.json", &half_plane());
    std::fs::write(
        dir.path().join("run.conf"),
        "# scan settings\nseed = 17\nout_dir = out\nmodel = m.json\npoint = 0.5,0.5\nradius = 0.1\nsamples = 800\n",
    )
    .unwrap();
    ok(dir.path(), &["--config", "run.conf", "scan"]);
    let lib = scan(&half_plane(), &[0.5, 0.5], &ScanConfig::new(0.1, 800, 17)).unwrap();
    assert_eq!(result(dir.path().join("out/scan.json"))["index"].as_f64().unwrap(), lib.index_value);
    // Command line wins over the file.
    ok(dir.path(), &["--config", "run.conf", "scan", "--radius", "0"]);
    assert_eq!(serde_json::from_str::<Value>(&std::fs::read_to_string(dir.path().join("out/scan.json")).unwrap()).unwrap()["parameters"]["radius"], 0.0);
}

#[test]
fn identical_models_give_no_corner_cases() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "a.json", &half_plane());
    save(dir.path(), "b.json", &half_plane());
    ok(dir.path(), &["disagree", "--model", "a.json", "--model", "b.json", "--data", "blobs:n=300", "--samples", "100"]);
    let r = result(dir.path().join("disagree_report.json"));
    assert_eq!(r["status"], "no corner cases");
    assert_eq!(r["corner_count"], 0);
    assert!(r["per_model"][0]["ks"].is_null());
}

fn exit_code(cwd: &Path, args: &[&str]) -> i32 {
    let out = zonescan(cwd, args);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    out.status.code().unwrap()
}

#[test]
fn errors_map_to_exit_codes_and_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    save(d, "m.json", &half_plane());
    save(d, "wide.json", &MlpModel::zeros(&[3, 2]).unwrap());

    assert_eq!(exit_code(d, &["train", "--data", "idx:missing-images,missing-labels"]), 3);
    assert_eq!(exit_code(d, &["train", "--data", "csv:nope.csv,classes=2"]), 3);
    assert_eq!(exit_code(d, &["scan", "--model", "absent.json", "--point", "0.1,0.1", "--radius", "0.1"]), 3);
    assert_eq!(exit_code(d, &["scan", "--model", "m.json", "--point", "0.1,1.2", "--radius", "0.1"]), 2);
    assert_eq!(exit_code(d, &["scan", "--model", "m.json", "--point", "0.1,0.2", "--radius", "-1"]), 2);
    assert_eq!(exit_code(d, &["scan", "--model", "m.json", "--point", "0.1,0.2,0.3", "--radius", "0.1"]), 2);
    assert_eq!(exit_code(d, &["adv", "--model", "m.json", "--data", "blobs:n=100,centers=0.3/0.5;0.7/0.5", "--n", "0"]), 2);
    assert_eq!(exit_code(d, &["watermark", "--model", "m.json", "--data", "blobs:n=100", "--key-size", "0"]), 2);
    assert_eq!(exit_code(d, &["disagree", "--model", "m.json", "--model", "wide.json", "--data", "blobs:n=100"]), 2);
    assert_eq!(exit_code(d, &["sweep", "--model", "m.json", "--point", "0.5,0.5", "--radii", "0.5,0.2"]), 2);
    assert_eq!(exit_code(d, &["--config", "none.conf", "surface", "--model", "m.json"]), 3);

    std::fs::write(d.join("bad.txt"), "0.1\nabc\n").unwrap();
    std::fs::write(d.join("good.txt"), "0.1\n0.2\n").unwrap();
    assert_eq!(exit_code(d, &["ks", "--a", "bad.txt", "--b", "good.txt"]), 2);

    let mut left: Vec<String> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    left.sort();
    assert_eq!(left, ["bad.txt", "good.txt", "m.json", "wide.json"]);
}

#[test]
fn ks_command_reads_value_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "0\n0\n0\n").unwrap();
    std::fs::write(dir.path().join("b.txt"), "1\n1\n1\n").unwrap();
    ok(dir.path(), &["ks", "--a", "a.txt", "--b", "b.txt"]);
    assert_eq!(result(dir.path().join("ks.json"))["statistic"], 1.0);
}
