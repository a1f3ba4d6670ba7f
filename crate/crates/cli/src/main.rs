//! `iaat` command-line entry point.
//!
//! Subcommands: `train`, `evaluate`, `sweep`, `report`. Experiments are
//! described by JSON config files; flags only select the subcommand, the
//! config path, and seed/output overrides. Exit codes: 0 success, 2 config
//! error, 3 numeric error, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use iaat_cli::config::ExperimentConfig;
use iaat_cli::data_io::build_dataset;
use iaat_cli::error::{CliError, Result};
use iaat_cli::memcsv::read_memory_csv;
use iaat_cli::runner::{cmd_evaluate, cmd_sweep, cmd_train, SurrogateInput};
use iaat_cli::svg::{extreme_epsilon_gallery, render, PlotKind, PlotSpec};

/// Environment variable naming the default output root.
const OUT_ROOT_ENV: &str = "IAAT_OUT_ROOT";

#[derive(Parser)]
#[command(name = "iaat", version, about = "Instance-adaptive adversarial training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model per the config; writes checkpoint, training log and
    /// (in iaat mode) the per-epoch epsilon memory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root (default: $IAAT_OUT_ROOT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint under the config's protocols; writes the
    /// report JSON and a flat CSV row.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Epsilon-memory CSV for radius statistics (default: the file
        /// next to the checkpoint, when present).
        #[arg(long)]
        memory: Option<PathBuf>,
        /// Surrogate checkpoint for a transfer attack evaluation.
        #[arg(long)]
        surrogate: Option<PathBuf>,
        /// Config of the surrogate run (default: the main config).
        #[arg(long)]
        surrogate_config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate one fixed-radius run per grid value plus the
    /// adaptive run, then render the tradeoff scatter. Completed members
    /// are skipped by fingerprint.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated training radii in /255 units, e.g. 1,2,4,8.
        #[arg(long)]
        eps_list: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a figure (or gallery CSV) from saved run artifacts.
    Report {
        /// tradeoff_scatter | sweep_lines | eps_evolution | eps_histogram
        /// | gallery
        #[arg(long)]
        kind: String,
        /// Comma-separated input paths (reports or memory CSVs).
        #[arg(long)]
        inputs: String,
        #[arg(long)]
        out: PathBuf,
        /// Whitebox protocol for the tradeoff robustness axis.
        #[arg(long)]
        protocol: Option<String>,
        /// Share of samples from each radius extreme for `gallery`.
        #[arg(long, default_value_t = 1.0)]
        percentile: f64,
        /// Experiment config (needed by `gallery` for the labels).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad epsilon '{s}' in eps list")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let dir = cmd_train(&cfg, &out_root(out))?;
            println!("trained {} -> {}", cfg.name, dir.display());
        }
        Command::Evaluate {
            config,
            checkpoint,
            memory,
            surrogate,
            surrogate_config,
            seed,
            out,
        } => {
            let cfg = load_config(&config, seed)?;
            let surrogate = match surrogate {
                Some(ck) => {
                    let scfg = match surrogate_config {
                        Some(path) => ExperimentConfig::load(&path)?,
                        None => cfg.clone(),
                    };
                    Some(SurrogateInput { checkpoint: ck, config: scfg })
                }
                None => None,
            };
            let report = cmd_evaluate(
                &cfg,
                &checkpoint,
                memory.as_deref(),
                surrogate.as_ref(),
                out.as_deref(),
            )?;
            println!("report {}", report.display());
        }
        Command::Sweep { config, eps_list, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let eps = parse_eps_list(&eps_list)?;
            let svg = cmd_sweep(&cfg, &eps, &out_root(out))?;
            println!("tradeoff {}", svg.display());
        }
        Command::Report { kind, inputs, out, protocol, percentile, config } => {
            let paths: Vec<PathBuf> = inputs.split(',').map(PathBuf::from).collect();
            if kind == "gallery" {
                let cfg_path = config.ok_or_else(|| {
                    CliError::Config("gallery needs --config for the labels".into())
                })?;
                let cfg = ExperimentConfig::load(&cfg_path)?;
                let (train, _) = build_dataset(&cfg.dataset)?;
                let mem_path = paths.first().ok_or_else(|| {
                    CliError::Config("gallery needs a memory CSV input".into())
                })?;
                let history = read_memory_csv(mem_path)?;
                let last = history.last().expect("nonempty history");
                extreme_epsilon_gallery(last, train.labels(), percentile, &out)?;
            } else {
                render(&PlotSpec {
                    kind: PlotKind::parse(&kind)?,
                    inputs: paths,
                    output: out.clone(),
                    protocol,
                })?;
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
