use std::path::Path;
use std::process::{Command, Output};

use chromaline::io::{save_masked_image, write_json};
use chromaline::{MaskedImage, SrgbColor};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chromaline")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn name_prints_family_css_and_lab() {
    let dir = tempfile::tempdir().unwrap();
    let (img, mask) = (dir.path().join("g.png"), dir.path().join("m.png"));
    save_masked_image(&MaskedImage::uniform(8, 8, SrgbColor::new(178, 34, 34)), &img, &mask).unwrap();
    let out = ok(&["name", "--image", &s(&img), "--mask", &s(&mask)]);
    // Firebrick sits nearer the brown prototype than the red one.
    assert_eq!(out.trim(), "family=brown css=firebrick lab=39.1179 55.9168 37.6490");
}

fn corpus(root: &Path) {
    let p = |r: &str| s(&root.join(r));
    ok(&["synth", "--out", &p("c"), "--seed", "4", "--records-per-house", "40"]);
    ok(&[
        "annotate", "--images", &p("c/images"), "--masks", &p("c/masks"), "--faces", &p("c/faces"), "--metadata",
        &p("c/truth.jsonl"), "--out", &p("c/observed.jsonl"), "--seed", "4",
    ]);
}

fn train(root: &Path, out: &str) {
    let p = |r: &str| s(&root.join(r));
    ok(&[
        "train", "--manifest", &p("c/truth.jsonl"), "--observed", &p("c/observed.jsonl"), "--task", "pipeline",
        "--seed", "4", "--epochs", "200", "--out", &p(out),
    ]);
}

#[test]
fn train_twice_gives_identical_models_and_report_has_four_stages() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    corpus(root);
    train(root, "m1");
    train(root, "m2");
    for f in ["bk.json", "regressor.json", "css/black.json"] {
        let (a, b) = (root.join("m1").join(f), root.join("m2").join(f));
        if a.exists() {
            assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{f}");
        }
    }
    assert!(root.join("m1/bk.json").exists() && root.join("m1/regressor.json").exists());

    let report = root.join("report.json");
    ok(&[
        "evaluate", "--manifest", &s(&root.join("c/truth.jsonl")), "--observed", &s(&root.join("c/observed.jsonl")),
        "--models", &s(&root.join("m1")), "--report", &s(&report),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    let stages: Vec<&str> =
        v["stages"]["rows"].as_array().unwrap().iter().map(|r| r["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["unconstrained", "css_centroid_only", "predicted_pipeline", "oracle_pipeline"]);
}

#[test]
fn abstract_writes_each_level() {
    let dir = tempfile::tempdir().unwrap();
    let (img, mask) = (dir.path().join("g.png"), dir.path().join("m.png"));
    save_masked_image(&MaskedImage::uniform(6, 6, SrgbColor::new(20, 90, 200)), &img, &mask).unwrap();
    for level in ["full_color", "grayscale", "silhouette", "edge_map"] {
        let out = dir.path().join(format!("{level}.png"));
        ok(&["abstract", "--in", &s(&img), "--mask", &s(&mask), "--level", level, "--out", &s(&out)]);
        assert!(out.exists());
    }
}

#[test]
fn errors_are_one_categorized_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["name", "--image", &s(&dir.path().join("missing.png")), "--mask", "nope.png"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 3}\n").unwrap();
    let out = run(&["train", "--manifest", &s(&bad), "--task", "bk", "--out", &s(&dir.path().join("m"))]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: parse: ") && err.contains("line 1"), "{err}");

    let spec = dir.path().join("spec.json");
    write_json(&spec, &serde_json::json!({"format_version": 99})).unwrap();
    let out = run(&["synth", "--spec", &s(&spec), "--out", &s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}
