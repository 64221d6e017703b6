//! Subcommand implementations and run-directory layout.
//!
//! A run directory holds `manifest.json` (written first), `config.toml`,
//! `rounds.csv`, `summary.json`, `final.ckpt` and optional `checkpoints/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use fpsim_core::attacks::AttackKind;
use fpsim_core::config::{AttackSection, DefenseSection, ExperimentConfig};
use fpsim_core::defenses::DefenseKind;
use fpsim_core::federation::{load_dataset, Experiment, RunOptions};
use fpsim_core::metrics::{asr, dpr, read_csv_file, totals, write_csv_file, Summary, SummaryMeta};
use fpsim_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::{ConfigArgs, WORKERS_ENV};

pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::Config(_)) {
        2
    } else {
        1
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub config: ExperimentConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub tool_version: String,
    pub config_hash: String,
}

fn workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn load_config(args: &ConfigArgs, extra: &[String]) -> Result<ExperimentConfig> {
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(extra);
    if let Some(seed) = args.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    ExperimentConfig::load(&args.config, &overrides)
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_at(path))
}

fn run_dir(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let hash = cfg.hash();
    out.join(format!("{}-{}-s{}", cfg.experiment.name, &hash[..12], cfg.experiment.seed))
}

/// The paired configuration whose accuracy serves as the ASR baseline.
fn baseline_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut base = cfg.clone();
    // Attack and defense knobs cannot influence an attack-free FedAvg run, so
    // resetting them lets every cell of a sweep share one cached baseline.
    base.attack = AttackSection::default();
    base.defense = DefenseSection::default();
    base.experiment.checkpoint_interval = 0;
    base
}

fn is_baseline(cfg: &ExperimentConfig) -> bool {
    cfg.attack.kind == AttackKind::None && cfg.defense.kind == DefenseKind::Fedavg
}

/// Maximum accuracy of the paired baseline run, cached by config hash.
fn baseline_accuracy(cfg: &ExperimentConfig, out: &Path) -> Result<f64> {
    let base = baseline_config(cfg);
    let dir = out.join("baselines").join(&base.hash()[..16]);
    let path = dir.join("summary.json");
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(s) = serde_json::from_str::<Summary>(&text) {
            return Ok(s.acc_m);
        }
    }
    let summary = execute(&PathBuf::from("<baseline>"), &base, &dir, None)?;
    Ok(summary.acc_m)
}

/// Run `cfg` into `dir`, writing every artifact.
fn execute(config_path: &Path, cfg: &ExperimentConfig, dir: &Path, baseline: Option<f64>) -> Result<Summary> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let manifest = RunManifest {
        config_path: config_path.to_path_buf(),
        config: cfg.clone(),
        output_dir: dir.to_path_buf(),
        seed: cfg.experiment.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(io_at(dir))?;
    let dataset = load_dataset(&cfg.dataset, cfg.experiment.seed, Path::new("."))?;
    let experiment = Experiment::new(cfg, &dataset)?;
    let checkpoint_dir = (cfg.experiment.checkpoint_interval > 0).then(|| dir.join("checkpoints"));
    if let Some(c) = &checkpoint_dir {
        fs::create_dir_all(c).map_err(io_at(c))?;
    }
    let output = experiment.run(&RunOptions {
        workers: workers()?,
        checkpoint_dir,
    })?;
    let csv = dir.join("rounds.csv");
    write_csv_file(&csv, &output.records)?;
    output.final_params.write_checkpoint(&dir.join("final.ckpt"))?;
    let meta = SummaryMeta {
        config_hash: manifest.config_hash,
        seed: cfg.experiment.seed,
        attack: cfg.attack.kind.name().into(),
        defense: cfg.defense.kind.name().into(),
        rounds_csv: "rounds.csv".into(),
    };
    let summary = Summary::from_records(&output.records, baseline, cfg.defense.kind.is_selection_based(), meta)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn run_configured(config_path: &Path, cfg: &ExperimentConfig, out: &Path, with_baseline: bool) -> Result<(PathBuf, Summary)> {
    let baseline = if !with_baseline || is_baseline(cfg) {
        None
    } else {
        Some(baseline_accuracy(cfg, out)?)
    };
    let dir = run_dir(out, cfg);
    let mut summary = execute(config_path, cfg, &dir, baseline)?;
    if with_baseline && is_baseline(cfg) {
        // The attack-free run is its own baseline.
        summary.acc = Some(summary.acc_m);
        summary.asr_pct = Some(asr(summary.acc_m, summary.acc_m)?);
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok((dir, summary))
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "N/A".into())
}

pub fn run(args: &ConfigArgs, out: &Path, with_baseline: bool) -> Result<ExitCode> {
    let cfg = load_config(args, &[])?;
    let (dir, s) = run_configured(&args.config, &cfg, out, with_baseline)?;
    println!(
        "{}: acc_m {:.4}, final {:.4}, ASR {}, DPR {}",
        dir.display(),
        s.acc_m,
        s.final_accuracy,
        fmt_pct(s.asr_pct),
        fmt_pct(s.dpr_pct)
    );
    Ok(ExitCode::SUCCESS)
}

fn axis_key(key: &str) -> String {
    match key {
        "beta" => "dataset.beta".into(),
        "attack" => "attack.kind".into(),
        "defense" => "defense.kind".into(),
        "attacker_fraction" => "experiment.attacker_fraction".into(),
        "seed" => "experiment.seed".into(),
        other => other.into(),
    }
}

/// Parse `key=v1,v2` axes into their Cartesian product of override lists.
pub fn expand_axes(axes: &[String]) -> Result<Vec<Vec<String>>> {
    let mut cells: Vec<Vec<String>> = vec![Vec::new()];
    for axis in axes {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis `{axis}` is not of the form key=v1,v2")))?;
        let key = axis_key(key.trim());
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("axis `{axis}` has no values")));
        }
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                let key = &key;
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push(format!("{key}={v}"));
                    c
                })
            })
            .collect();
    }
    Ok(cells)
}

pub fn sweep(args: &ConfigArgs, axes: &[String], out: &Path, with_baseline: bool) -> Result<ExitCode> {
    let cells = expand_axes(axes)?;
    // Validate the base configuration before spending time on cells.
    load_config(args, &[])?;
    fs::create_dir_all(out).map_err(io_at(out))?;
    let table = out.join("sweep.csv");
    let mut rows = vec!["cell,attack,defense,acc,acc_m,asr_pct,dpr_pct,run_dir,status".to_string()];
    let mut failures = 0;
    for cell in &cells {
        let label = cell.join(" ");
        let outcome = load_config(args, cell).and_then(|cfg| {
            let (dir, s) = run_configured(&args.config, &cfg, out, with_baseline)?;
            Ok((cfg, dir, s))
        });
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        match outcome {
            Ok((cfg, dir, s)) => {
                println!("{label}: acc_m {:.4}, ASR {}, DPR {}", s.acc_m, fmt_pct(s.asr_pct), fmt_pct(s.dpr_pct));
                rows.push(format!(
                    "\"{label}\",{},{},{},{:.6},{},{},{},ok",
                    cfg.attack.kind.name(),
                    cfg.defense.kind.name(),
                    opt(s.acc),
                    s.acc_m,
                    opt(s.asr_pct),
                    opt(s.dpr_pct),
                    dir.display()
                ));
            }
            Err(e) => {
                failures += 1;
                eprintln!("{label}: failed: {e}");
                rows.push(format!("\"{label}\",,,,,,,,\"error: {}\"", e.to_string().replace('"', "'")));
            }
        }
    }
    fs::write(&table, rows.join("\n") + "\n").map_err(io_at(&table))?;
    println!("{} cells, {failures} failed; table in {}", cells.len(), table.display());
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_dirs(roots: &[PathBuf]) -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    for root in roots {
        if root.join("summary.json").exists() {
            dirs.push(root.clone());
        } else if let Ok(entries) = fs::read_dir(root) {
            let mut children: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join("summary.json").exists())
                .collect();
            children.sort();
            dirs.extend(children);
        } else {
            dirs.push(root.clone());
        }
    }
    dirs
}

/// Check a summary against metrics recomputed from its CSV, and write the
/// accuracy series for plotting.
fn check_run(dir: &Path) -> Result<Summary> {
    let text = fs::read_to_string(dir.join("summary.json")).map_err(io_at(dir))?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("summary.json: {e}")))?;
    let records = read_csv_file(&dir.join(&s.rounds_csv))?;
    let t = totals(&records)?;
    let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(1.0),
        (None, None) => true,
        _ => false,
    };
    let asr_again = s.acc.map(|acc| asr(acc, t.max_accuracy)).transpose()?;
    let dpr_again = if s.dpr_pct.is_some() { dpr(t.n_p, t.n_s) } else { None };
    if !same(Some(s.acc_m), Some(t.max_accuracy)) || !same(s.asr_pct, asr_again) || !same(s.dpr_pct, dpr_again) {
        return Err(Error::InvalidInput("summary disagrees with rounds.csv".into()));
    }
    let mut series = String::from("round,accuracy\n");
    for r in &records {
        if let Some(a) = r.accuracy {
            series.push_str(&format!("{},{a:.6}\n", r.round));
        }
    }
    let path = dir.join("accuracy_series.csv");
    fs::write(&path, series).map_err(io_at(&path))?;
    Ok(s)
}

pub fn report(roots: &[PathBuf]) -> Result<ExitCode> {
    let dirs = run_dirs(roots);
    let mut invalid = 0;
    println!(
        "{:<40} {:<16} {:<8} {:>8} {:>8} {:>8} {:>8}",
        "run", "attack", "defense", "acc", "acc_m", "ASR%", "DPR%"
    );
    for dir in &dirs {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match check_run(dir) {
            Ok(s) => println!(
                "{:<40} {:<16} {:<8} {:>8} {:>8.4} {:>8} {:>8}",
                name,
                s.attack,
                s.defense,
                s.acc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into()),
                s.acc_m,
                s.asr_pct.map(|a| format!("{a:.2}")).unwrap_or_else(|| "-".into()),
                fmt_pct(s.dpr_pct)
            ),
            Err(e) => {
                invalid += 1;
                println!("{name:<40} INVALID: {e}");
            }
        }
    }
    Ok(if invalid == 0 && !dirs.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn partition_inspect(args: &ConfigArgs, beta: Option<f64>, limit: usize) -> Result<ExitCode> {
    let mut extra = Vec::new();
    if let Some(b) = beta {
        extra.push(format!("dataset.beta={b}"));
        extra.push("dataset.iid=false".into());
    }
    let mut cfg = load_config(args, &extra)?;
    // Histograms do not depend on the attack or defense.
    cfg.attack.kind = AttackKind::None;
    cfg.defense.kind = DefenseKind::Fedavg;
    let dataset = load_dataset(&cfg.dataset, cfg.experiment.seed, Path::new("."))?;
    let classes = dataset.num_classes;
    let exp = Experiment::new(&cfg, &dataset)?;
    let hists = exp.partition.class_histograms(exp.train.labels(), classes);
    let header: Vec<String> = (0..classes).map(|c| format!("{c:>5}")).collect();
    println!("client     n {}", header.join(""));
    for (i, h) in hists.iter().enumerate().take(limit) {
        let cells: Vec<String> = h.iter().map(|c| format!("{c:>5}")).collect();
        println!("{i:>6} {:>5} {}", h.iter().sum::<usize>(), cells.join(""));
    }
    let beta_label = exp.partition.beta.map(|b| b.to_string()).unwrap_or_else(|| "iid".into());
    println!(
        "beta {beta_label}, seed {}, {} clients, mean class entropy {:.4} nats",
        cfg.experiment.seed,
        hists.len(),
        exp.partition.mean_class_entropy(exp.train.labels(), classes)
    );
    Ok(ExitCode::SUCCESS)
}
