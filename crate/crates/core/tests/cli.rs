//! Binary-level CLI tests: exit codes, flag/file precedence, replay
//! headers.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ionboost"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ionboost-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_csv_body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.to_string())
        .collect()
}

#[test]
fn xor_certify_succeeds_with_exit_zero() {
    let dir = temp_dir("xor");
    let status = bin()
        .args(["xor", "--trees", "5", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let body = read_csv_body(&dir.join("xor_agreement.csv"));
    assert_eq!(body[0], "case,tree_index,tree_depth,agreement,exact_half");
    // 3 k-values x 5 trees plus the explicit-tree control row.
    assert_eq!(body.len(), 1 + 16);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_one() {
    // Unknown experiment flag value.
    let out = bin()
        .args(["plateau", "--pop", "pentagon", "--out", "/tmp/unused-ionboost"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("pop"), "{stderr}");

    // Unknown config key with suggestion.
    let dir = temp_dir("badkey");
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, "depthz = [1]\n").unwrap();
    let out = bin()
        .args(["sweep-depth", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("did you mean `depths`"), "{stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn data_errors_exit_two() {
    let out = bin()
        .args([
            "backtest",
            "--panel",
            "/nonexistent/panel.csv",
            "--out",
            "/tmp/unused-ionboost2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = temp_dir("precedence");
    let cfg = dir.join("cfg.toml");
    std::fs::write(
        &cfg,
        "experiment = \"synth-panel\"\nmonths = 9\nstocks = 12\nfactors = 3\n",
    )
    .unwrap();
    let out_a = dir.join("a");
    let status = bin()
        .args(["synth-panel", "--config"])
        .arg(&cfg)
        .args(["--months", "4", "--out"])
        .arg(&out_a)
        .status()
        .unwrap();
    assert!(status.success());
    let body = read_csv_body(&out_a.join("panel.csv"));
    // Header plus 4 months x 12 stocks: the flag overrode months, the file
    // kept stocks.
    assert_eq!(body.len(), 1 + 4 * 12);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn conflicting_experiment_in_file_is_usage_error() {
    let dir = temp_dir("conflict");
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, "experiment = \"toy\"\n").unwrap();
    let out = bin()
        .args(["sweep-m", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("toy") && stderr.contains("sweep-m"), "{stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn replay_header_embeds_config_hash_and_resolved_config() {
    let dir = temp_dir("replay");
    let output = bin()
        .args([
            "synth-panel", "--months", "3", "--stocks", "4", "--factors", "3", "--seed", "9",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("resolved config:"), "{stdout}");
    let text = std::fs::read_to_string(dir.join("panel.csv")).unwrap();
    let mut lines = text.lines();
    let hash_line = lines.next().unwrap();
    assert!(hash_line.starts_with("# config_hash="), "{hash_line}");
    let config_line = lines.next().unwrap();
    assert!(config_line.contains("experiment=synth-panel seed=9"), "{config_line}");
    // The emitted panel loads back through the panel reader.
    let panel = ionboost::backtest::load_panel(&dir.join("panel.csv")).unwrap();
    assert_eq!(panel.rows.len(), 12);
    std::fs::remove_dir_all(&dir).ok();
}
