use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pttd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pttd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn pttd")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn unit_transmission_leaves_images_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let out = pttd(&["synth", "--generate", "3", "--size", "48", "--mode", "scalar", "--t", "1", "--out", "s"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..3 {
        let clean = std::fs::read(dir.path().join(format!("s/clean/scene_{i:03}.png"))).unwrap();
        let hazy = std::fs::read(dir.path().join(format!("s/hazy/scene_{i:03}.png"))).unwrap();
        assert_eq!(clean, hazy);
    }
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        assert!(pttd(&["synth", "--generate", "2", "--size", "40", "--seed", "5", "--out", name], dir.path()).status.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n).join("hazy/scene_001.png")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn dehaze_reports_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pttd(&["synth", "--generate", "2", "--size", "64", "--out", "s"], dir.path()).status.success());
    let out = pttd(
        &["dehaze", "--input", "s/hazy", "--gt", "s/clean", "--prompt-source", "s/clean/scene_000.png", "--out", "d", "--workers", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["processed"], 2);
    assert_eq!(report["report"]["summary"]["scored"], 2);
    assert!(dir.path().join("d/scene_001.png").exists());
    assert!(dir.path().join("d/scene_001.trace.json").exists());
    assert!(dir.path().join("d/report.json").exists());
}

#[test]
fn missing_required_flag_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = pttd(&["dehaze", "--out", "d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("is required"));
}

#[test]
fn one_bad_file_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pttd(&["synth", "--generate", "2", "--size", "64", "--out", "s"], dir.path()).status.success());
    std::fs::write(dir.path().join("s/hazy/broken.png"), b"not a png").unwrap();
    let out = pttd(&["prompt", "--input", "s/hazy", "--prompt-source", "s/clean/scene_000.png", "--out", "p"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["processed"], 2);
    assert_eq!(report["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pttd(&["synth", "--generate", "1", "--size", "64", "--out", "s"], dir.path()).status.success());
    std::fs::write(dir.path().join("run.toml"), "[pgm]\ntau = 0.5\npatch_divisor = 4\n").unwrap();
    let args = ["prompt", "--config", "run.toml", "--input", "s/hazy", "--prompt-source", "s/clean/scene_000.png", "--out", "p"];
    let from_file = json(&pttd(&args, dir.path()));
    let gating = &from_file["report"][0]["gating"];
    assert_eq!(gating["tau"], 0.5);
    assert_eq!(gating["patch_side"], 16);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--tau", "0.01"]);
    let overridden = json(&pttd(&with_flag, dir.path()));
    assert_eq!(overridden["report"][0]["gating"]["tau"], 0.01);
    assert_eq!(overridden["report"][0]["gating"]["patch_side"], 16);
}

#[test]
fn undersized_image_gets_guidance() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pttd(&["synth", "--generate", "1", "--size", "24", "--out", "s"], dir.path()).status.success());
    let out = pttd(
        &["dehaze", "--input", "s/hazy", "--prompt-source", "s/clean/scene_000.png", "--out", "d", "--levels", "5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["failures"][0]["error"].as_str().unwrap().contains("--levels"));
}

#[test]
fn truncated_feature_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.ftx"), b"FTX1\x01\x00").unwrap();
    let out = pttd(&["fln-apply", "--input", "x.ftx", "--prompt-source", "x.ftx", "--out", "y.ftx"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset"));
    assert!(!dir.path().join("y.ftx").exists());
}

#[test]
fn key_value_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pttd(&["synth", "--generate", "1", "--size", "64", "--out", "s"], dir.path()).status.success());
    let out = pttd(&["eval", "--input", "s/hazy", "--gt", "s/clean", "--format", "kv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("report.mean_psnr=")));
}
