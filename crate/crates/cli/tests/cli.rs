use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn univest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_univest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_DENOISE: &str = r#"
experiment = "denoise-scalar"
n = 32
seeds = [1]

[source]
kind = "two-state-markov"
stay = [0.9, 0.9]
levels = [0.0, 1.0]

[sweep]
noise_variance = [0.25]

[estimator]
grid = "adaptive"
levels = 4
sweeps = 60
burn_in = 10
samples = 40
"#;

#[test]
fn denoise_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", SMALL_DENOISE);
    let out = dir.path().join("out");
    let o = univest(&[
        "denoise",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("denoise.csv")).unwrap();
    assert!(csv.starts_with("n,noise_variance,seed,mse_map,mse_mmse,ratio\n"));
    assert_eq!(csv.lines().count(), 2);
    assert!(out.join("denoise.csv.meta.toml").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("MAP/MMSE"));
}

#[test]
fn seed_flag_replaces_seed_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        &SMALL_DENOISE.replace("seeds = [1]", "seeds = [1, 2, 3]"),
    );
    let out = dir.path().join("out");
    let o = univest(&[
        "denoise",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("denoise.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').nth(2), Some("9"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", SMALL_DENOISE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(univest(&[
        "denoise",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--threads",
        "1"
    ])
    .status
    .success());
    assert!(univest(&[
        "denoise",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "2"
    ])
    .status
    .success());
    assert_eq!(
        fs::read(a.join("denoise.csv")).unwrap(),
        fs::read(b.join("denoise.csv")).unwrap()
    );
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &SMALL_DENOISE.replace("samples = 40", "samplez = 40"),
    );
    let o = univest(&[
        "denoise",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samplez"));
    assert!(!dir.path().join("denoise.csv").exists());
}

#[test]
fn wrong_verb_for_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", SMALL_DENOISE);
    let o = univest(&[
        "cs",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = univest(&["lossy", "--config", "/nonexistent/univest.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_threads_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", SMALL_DENOISE);
    let o = univest(&[
        "denoise",
        "--config",
        &cfg,
        "--threads",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overflowing_signal_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        &SMALL_DENOISE.replace("levels = [0.0, 1.0]", "levels = [0.0, 1e200]"),
    );
    let o = univest(&[
        "denoise",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
