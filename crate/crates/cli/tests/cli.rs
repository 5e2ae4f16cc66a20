use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lss_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lss-lab"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lss_lab(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_corpus(dir: &Path) {
    ok(
        dir,
        &["generate", "--out", "data", "--seed", "3", "--counts", "lorenz=2,logistic=2,white=2,pink=2", "--length", "400"],
    );
}

#[test]
fn generate_writes_manifest_and_series() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let manifest = fs::read_to_string(tmp.path().join("data/manifest.json")).unwrap();
    assert_eq!(manifest.matches("\"id\"").count(), 8);
    let txt = fs::read_dir(tmp.path().join("data"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "txt"))
        .count();
    assert_eq!(txt, 8);
}

#[test]
fn step_by_step_flow_and_classify_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);
    ok(d, &["train-ae", "--data", "data", "--domain", "td", "--out", "td.ae", "--epochs", "2"]);
    ok(d, &["train-ae", "--data", "data", "--domain", "fd", "--out", "fd.ae", "--epochs", "2"]);
    ok(d, &["rasterize", "--data", "data", "--ae-td", "td.ae", "--ae-fd", "fd.ae", "--r", "32", "--out", "imgs"]);
    assert!(d.join("imgs/extent.json").exists());
    ok(
        d,
        &["train-clf", "--images", "imgs", "--manifest", "data/manifest.json", "--out", "m.cnn", "--epochs", "1"],
    );
    let first = fs::read_dir(d.join("imgs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "pgm"))
        .unwrap();
    let stdout = ok(
        d,
        &["classify", "--model", "m.cnn", "--image", first.to_str().unwrap(), "--cam", "cam.pgm"],
    );
    let line = stdout.lines().next().unwrap();
    let fields: Vec<&str> = line.split(' ').collect();
    assert!(fields[0] == "label=S" || fields[0] == "label=NS", "{line}");
    let c_s: f64 = fields[1].strip_prefix("c_s=").unwrap().parse().unwrap();
    let c_ns: f64 = fields[2].strip_prefix("c_ns=").unwrap().parse().unwrap();
    assert!((c_s + c_ns - 1.0).abs() < 1e-5);
    assert!(fs::read(d.join("cam.pgm")).unwrap().starts_with(b"P5\n32 32\n255\n"));
    let csv = fs::read_to_string(d.join("cam.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn run_is_reproducible_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);
    let config = r#"{"resolution": 32, "autoencoder": {"epochs": 2}, "classifier": {"epochs": 2}, "data_dir": "data", "work_dir": "w1"}"#;
    fs::write(d.join("cfg.json"), config).unwrap();
    ok(d, &["run", "--config", "cfg.json"]);
    ok(d, &["run", "--config", "cfg.json", "--work", "w2"]);
    let a = fs::read(d.join("w1/report.csv")).unwrap();
    let b = fs::read(d.join("w2/report.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("id,c_s,c_ns,lss_label,reference_label,agree,split\n"));
    assert_eq!(text.lines().count(), 9);
    let summary = fs::read_to_string(d.join("w1/summary.json")).unwrap();
    assert!(summary.contains("\"accuracy\"") && summary.contains("\"per_class\"") && summary.contains("\"config\""));

    let eval = ok(d, &["evaluate", "--models", "w1/models", "--manifest", "data/manifest.json"]);
    assert!(eval.lines().last().unwrap().starts_with("accuracy="));
}

#[test]
fn ci_prints_table_and_label() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--out", "data", "--counts", "logistic=1", "--length", "3000"]);
    let file = fs::read_dir(d.join("data"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "txt"))
        .unwrap();
    let out = ok(d, &["ci", "--series", file.to_str().unwrap()]);
    assert!(out.starts_with("ed,cd\n1,"));
    assert_eq!(out.lines().count(), 10);
    assert!(out.trim_end().ends_with("label=NS"), "{out}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // I/O
    assert_eq!(lss_lab(d, &["ci", "--series", "missing.txt"]).status.code(), Some(3));
    // validation
    fs::write(d.join("const.txt"), "1\n".repeat(50)).unwrap();
    assert_eq!(lss_lab(d, &["ingest", "--in", "const.txt", "--format", "xyz", "--out", "o.txt"]).status.code(), Some(2));
    assert_eq!(lss_lab(d, &["ci", "--series", "const.txt"]).status.code(), Some(2));
    // missing corpus directory names the stage
    let out = lss_lab(d, &["run", "--desk", "--data", "nowhere", "--work", "w"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `load`"));
    // divergence
    small_corpus(d);
    ok(d, &["train-ae", "--data", "data", "--domain", "td", "--out", "td.ae", "--epochs", "1"]);
    ok(d, &["train-ae", "--data", "data", "--domain", "fd", "--out", "fd.ae", "--epochs", "1"]);
    ok(d, &["rasterize", "--data", "data", "--ae-td", "td.ae", "--ae-fd", "fd.ae", "--r", "32", "--out", "imgs"]);
    let out = lss_lab(
        d,
        &["train-clf", "--images", "imgs", "--manifest", "data/manifest.json", "--out", "m.cnn", "--epochs", "2", "--lr", "1e300"],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn ingest_resamples_time_value_input() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("lc.txt"), "0.0 1\n0.05 3\n0.1 5\n0.3 7\n").unwrap();
    let out = ok(d, &["ingest", "--in", "lc.txt", "--format", "tv", "--dt", "0.1", "--out", "o.txt"]);
    assert!(out.contains("4 samples"));
    let values: Vec<f64> = fs::read_to_string(d.join("o.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(values, vec![2.0, 5.0, 6.0, 7.0]);
}
