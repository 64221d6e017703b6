//! `fpsim`: run, sweep and report federated poisoning experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Worker-thread count for client training; the only environment input.
pub const WORKERS_ENV: &str = "FPSIM_WORKERS";

#[derive(Parser)]
#[command(name = "fpsim", version, about = "Federated learning poisoning testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
pub struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config field, `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Parent directory of run directories.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Skip the paired attack-free baseline (ASR is then left empty).
        #[arg(long)]
        no_baseline: bool,
    },
    /// Run the Cartesian product of axis values.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `key=v1,v2,...`; keys are `section.key` or one of the aliases
        /// beta, attack, defense, attacker_fraction, seed.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        no_baseline: bool,
    },
    /// Tabulate run directories and write plot-data series.
    Report {
        /// Run directories, or parents of run directories.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Print per-client class histograms of the configured partition.
    PartitionInspect {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Override the Dirichlet concentration.
        #[arg(long)]
        beta: Option<f64>,
        /// Print at most this many clients.
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { cfg, out, no_baseline } => commands::run(&cfg, &out, !no_baseline),
        Command::Sweep {
            cfg,
            axes,
            out,
            no_baseline,
        } => commands::sweep(&cfg, &axes, &out, !no_baseline),
        Command::Report { dirs } => commands::report(&dirs),
        Command::PartitionInspect { cfg, beta, limit } => commands::partition_inspect(&cfg, beta, limit),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
