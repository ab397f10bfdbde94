//! End-to-end tests of the compiled binary: exit codes, error wording,
//! and the files a run leaves behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlsatnet-cli"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mlsatnet_bin_{}_{name}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/toy.toml")
}

#[test]
fn run_succeeds_and_writes_artifacts() {
    let dir = scratch("run");
    let out = bin()
        .args(["run", "--config"])
        .arg(toy_config())
        .args(["--algorithm", "greedy"])
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("greedy over low / high"));
    assert!(stdout.contains("k=3"));
    assert!(dir.join("out/metrics.json").is_file());
    assert!(dir.join("out/apl_vs_k.csv").is_file());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_domain_error_exits_2_and_names_the_field() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.toml");
    fs::write(
        &cfg,
        r#"
            [[layers]]
            planes = 4
            sats_per_plane = 4
            phase_factor = 1
            altitude_km = -5.0
            inclination_deg = 50.0
            [[layers]]
            preset = "celestri"
            [optimizer]
            algorithm = "greedy"
            k = 2
        "#,
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out", "unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("layers[0].altitude_km"), "stderr: {stderr}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let out = bin()
        .args(["run", "--config"])
        .arg(toy_config())
        .args(["--algorithm", "dijkstra", "--out", "unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unknown algorithm"), "stderr: {stderr}");
    assert!(stderr.contains("tpilcd"));
}

#[test]
fn sweep_without_a_range_is_rejected() {
    let out = bin()
        .args(["sweep", "--config"])
        .arg(toy_config())
        .args(["--out", "unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("optimizer.k_range"), "stderr: {stderr}");
}

#[test]
fn sweep_with_range_reports_each_k() {
    let dir = scratch("sweep");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(toy_config())
        .args(["--algorithm", "greedy", "--k-range", "1..3"])
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for k in 1..=3 {
        assert!(stdout.contains(&format!("k={k}")), "stdout: {stdout}");
    }
    assert!(stdout.contains("fit: apl ="));
    let body = fs::read_to_string(dir.join("out/apl_vs_k.csv")).unwrap();
    assert_eq!(body.lines().count(), 4);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn presets_lists_the_bundled_constellations() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("globalstar"));
    assert!(stdout.contains("celestri"));
    assert!(stdout.contains("altitude_km"));
}

#[test]
fn compare_prints_one_row_per_algorithm() {
    let out = bin()
        .args(["compare", "--config"])
        .arg(toy_config())
        .args(["--algorithm", "greedy", "--algorithm", "random"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("greedy"));
    assert!(stdout.contains("random"));
}
