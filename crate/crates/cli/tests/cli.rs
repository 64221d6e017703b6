//! Drives the `fpsim` binary end to end on the blobs task.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BLOBS: &str = r#"
[experiment]
name = "blobs"
clients = 12
selected = 6
rounds = 6
attacker_fraction = 0.25
lr = 0.1

[dataset]
kind = "blobs"
train_fraction = 1.0
blob_classes = 3
blob_per_class = 30
blob_side = 5

[attack]
kind = "dfa_r"
synth_size = 8

[defense]
kind = "mkrum"
reference_size = 30
"#;

fn fpsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("FPSIM_WORKERS")
        .output()
        .expect("fpsim runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blobs.toml"), BLOBS).unwrap();
    dir
}

fn run_dirs(out: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("summary.json").exists())
        .collect();
    dirs.sort();
    dirs
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn repeated_runs_write_identical_csvs() {
    let dir = setup();
    let a = fpsim(dir.path(), &["run", "--config", "blobs.toml", "--out", "a"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = Command::new(env!("CARGO_BIN_EXE_fpsim"))
        .args(["run", "--config", "blobs.toml", "--out", "b"])
        .current_dir(dir.path())
        .env("FPSIM_WORKERS", "4")
        .output()
        .unwrap();
    assert!(b.status.success());
    let (da, db) = (run_dirs(&dir.path().join("a")), run_dirs(&dir.path().join("b")));
    assert_eq!(da.len(), 1);
    let csv_a = fs::read(da[0].join("rounds.csv")).unwrap();
    assert_eq!(csv_a, fs::read(db[0].join("rounds.csv")).unwrap());
    let header = String::from_utf8(csv_a).unwrap();
    assert!(header.starts_with(
        "round,accuracy,train_loss,selected,malicious_selected,malicious_admitted,defense_ms,attack_ms\n"
    ));
    for file in ["manifest.json", "config.toml", "final.ckpt", "summary.json"] {
        assert!(da[0].join(file).exists(), "{file} missing");
    }
}

#[test]
fn overrides_are_recorded_in_the_manifest() {
    let dir = setup();
    let o = fpsim(
        dir.path(),
        &[
            "run", "--config", "blobs.toml", "--out", "runs", "--seed", "9", "--set", "attack.lambda_reg=0.5",
            "--set", "defense.kind=median", "--no-baseline",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = run_dirs(&dir.path().join("runs"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["attack"]["lambda_reg"], 0.5);
    assert_eq!(manifest["config"]["defense"]["kind"], "median");
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], hash);
    assert!(summary["asr_pct"].is_null());
    assert!(summary["dpr_pct"].is_null());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = setup();
    let missing = fpsim(dir.path(), &["run", "--config", "nope.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "[experiment]\nbogus = 1\n").unwrap();
    let unknown = fpsim(dir.path(), &["run", "--config", "bad.toml"]);
    assert_eq!(unknown.status.code(), Some(2));
    let invalid = fpsim(dir.path(), &["run", "--config", "blobs.toml", "--set", "experiment.selected=50"]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("experiment.selected"));
}

#[test]
fn sweep_writes_one_row_per_cell_and_report_marks_statistic_defenses() {
    let dir = setup();
    let o = fpsim(
        dir.path(),
        &[
            "sweep", "--config", "blobs.toml", "--out", "sweep", "--axis", "defense=mkrum,bulyan,trmean,median",
            "--axis", "attack=dfa_r,random_weights", "--set", "defense.assumed_fraction=0.2",
        ],
    );
    assert!(o.status.success(), "{}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));

    let report = fpsim(dir.path(), &["report", "sweep"]);
    assert!(report.status.success(), "{}", stdout(&report));
    let text = stdout(&report);
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines.len(), 8);
    for line in lines {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let dpr = cols[cols.len() - 1];
        match cols[2] {
            "trmean" | "median" => assert_eq!(dpr, "N/A", "{line}"),
            _ => assert!(dpr.parse::<f64>().is_ok() || dpr == "N/A", "{line}"),
        }
    }
    assert!(run_dirs(&dir.path().join("sweep")).iter().all(|d| d.join("accuracy_series.csv").exists()));
}

#[test]
fn report_flags_tampered_summaries() {
    let dir = setup();
    assert!(fpsim(dir.path(), &["run", "--config", "blobs.toml", "--out", "runs"]).status.success());
    let run = run_dirs(&dir.path().join("runs"))[0].clone();
    let path = run.join("summary.json");
    let mut summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    summary["acc_m"] = serde_json::json!(0.01);
    fs::write(&path, summary.to_string()).unwrap();
    let report = fpsim(dir.path(), &["report", "runs"]);
    assert_eq!(report.status.code(), Some(1));
    assert!(stdout(&report).contains("INVALID"));
}

#[test]
fn partition_inspect_prints_histograms() {
    let dir = setup();
    let o = fpsim(dir.path(), &["partition-inspect", "--config", "blobs.toml", "--beta", "0.1", "--limit", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[4].contains("beta 0.1"));
    assert!(lines[4].contains("mean class entropy"));
}
