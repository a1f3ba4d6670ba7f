//! Experiment orchestration: the train, evaluate, sweep and report commands.
//!
//! Every run lives in `<out_root>/<name>/<fingerprint-prefix>/` and carries
//! its effective config, so any artifact is reconstructible from the files
//! next to it. Training and evaluation are pure functions of the config and
//! its seed; rerunning a command overwrites byte-identical files. Sweeps
//! skip members whose report already matches their fingerprint.

use std::fs;
use std::path::{Path, PathBuf};

use iaat_core::adaptive::{train_epoch_fixed, train_epoch_iaat, EpochStats};
use iaat_core::data::LabeledDataset;
use iaat_core::eval::{
    corruption_suite, epsilon_statistics, epsilon_sweep, natural_accuracy, transfer_attack_eval,
    whitebox_suite, Protocol, RunReport,
};
use iaat_core::network::Network;
use iaat_core::rng::{self, Stream};

use crate::checkpoint;
use crate::config::{ExperimentConfig, ModelConfig, TrainMode, E255};
use crate::data_io::build_dataset;
use crate::error::{CliError, Result};
use crate::memcsv::{read_memory_csv, write_memory_csv};
use crate::report_io::{ProtocolEntry, ReportFile};
use crate::svg::{render, PlotKind, PlotSpec};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const MEMORY_FILE: &str = "eps_memory.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_ROW_FILE: &str = "report_row.csv";

/// Directory of one run under the output root.
pub fn run_dir(out_root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out_root.join(&cfg.name).join(&cfg.fingerprint()[..12])
}

fn build_network(cfg: &ExperimentConfig, ds: &LabeledDataset) -> Result<Network> {
    let shape = ds.sample_shape();
    match &cfg.model {
        ModelConfig::Mlp { hidden } => {
            let dim: usize = shape.iter().product();
            Ok(Network::mlp(dim, hidden, ds.n_classes, cfg.seed)?)
        }
        ModelConfig::Conv { layers } => {
            if shape.len() != 3 {
                return Err(CliError::Config(format!(
                    "conv model needs [c, h, w] samples, dataset has rank {}",
                    shape.len()
                )));
            }
            let convs: Vec<(usize, usize)> =
                layers.iter().map(|l| (l.channels, l.kernel)).collect();
            Ok(Network::conv_net(
                [shape[0], shape[1], shape[2]],
                &convs,
                ds.n_classes,
                cfg.seed,
            )?)
        }
    }
}

fn train_log_line(epoch: usize, lr: f64, stats: &EpochStats) -> String {
    let mean_eps: f64 =
        stats.applied_eps.iter().sum::<f64>() / stats.applied_eps.len().max(1) as f64;
    format!(
        "{},{},{},{},{}\n",
        epoch + 1,
        lr,
        stats.mean_loss,
        stats.clean_accuracy,
        mean_eps / E255
    )
}

/// Train per the config and persist checkpoint, training log, epsilon
/// memory (iaat mode) and the effective config. Returns the run directory.
pub fn cmd_train(cfg: &ExperimentConfig, out_root: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = run_dir(out_root, cfg);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (train, _) = build_dataset(&cfg.dataset)?;
    let mut net = build_network(cfg, &train)?;
    let mut opt = cfg.optimizer.build()?;

    let mut log = String::from("epoch,learning_rate,mean_loss,clean_accuracy,mean_eps_255\n");
    match cfg.mode {
        TrainMode::Clean | TrainMode::FixedEps => {
            let attack = cfg.effective_training_attack()?;
            for epoch in 0..cfg.epochs {
                let stats = train_epoch_fixed(
                    &mut net,
                    &mut opt,
                    &train,
                    &attack,
                    cfg.batch_size,
                    epoch,
                    cfg.seed,
                )?;
                log.push_str(&train_log_line(epoch, opt.lr_at(epoch), &stats));
            }
        }
        TrainMode::Iaat => {
            let iaat = cfg.build_iaat()?;
            let mut mem = iaat.new_memory(train.len())?;
            for epoch in 0..cfg.epochs {
                let stats = train_epoch_iaat(
                    &mut net,
                    &mut opt,
                    &train,
                    &mut mem,
                    &iaat,
                    cfg.batch_size,
                    epoch,
                    cfg.seed,
                )?;
                mem.snapshot();
                log.push_str(&train_log_line(epoch, opt.lr_at(epoch), &stats));
            }
            write_memory_csv(&dir.join(MEMORY_FILE), mem.history())?;
        }
    }

    checkpoint::save(&dir.join(CHECKPOINT_FILE), &net, cfg.seed, cfg.epochs)?;
    let log_path = dir.join(TRAIN_LOG_FILE);
    fs::write(&log_path, log).map_err(|e| CliError::io(&log_path, e))?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.canonical_json()).map_err(|e| CliError::io(&cfg_path, e))?;
    Ok(dir)
}

/// Optional transfer-surrogate inputs for an evaluation.
pub struct SurrogateInput {
    pub checkpoint: PathBuf,
    pub config: ExperimentConfig,
}

/// Evaluate a checkpoint under the config's protocols and persist the
/// report next to it (or into `report_dir` when given).
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    checkpoint_path: &Path,
    memory_path: Option<&Path>,
    surrogate: Option<&SurrogateInput>,
    report_dir: Option<&Path>,
) -> Result<PathBuf> {
    cfg.validate()?;
    let ck = checkpoint::load(checkpoint_path)?;
    let (_, test) = build_dataset(&cfg.dataset)?;
    let protocols: Vec<Protocol> =
        cfg.eval.protocols.iter().map(|p| p.to_protocol()).collect();
    let requested: Vec<String> = protocols.iter().map(|p| p.name()).collect();
    let attack_seed = rng::stream_seed(cfg.seed, Stream::EvalAttack);

    let natural_acc = natural_accuracy(&ck.network, &test)?;
    let whitebox = whitebox_suite(&ck.network, &test, &protocols, attack_seed)?;

    let eps_sweep = if cfg.eval.sweep_eps_255.is_empty() {
        Vec::new()
    } else {
        let grid: Vec<f64> = cfg.eval.sweep_eps_255.iter().map(|e| e * E255).collect();
        let template = Protocol::new(cfg.eval.sweep_steps, cfg.eval.sweep_restarts, 0.0);
        epsilon_sweep(&ck.network, &test, &grid, &template, rng::mix(attack_seed, 0x53))?
    };

    let corruption_acc = if cfg.eval.corruption_severities.is_empty() {
        Default::default()
    } else {
        corruption_suite(
            &ck.network,
            &test,
            &cfg.eval.corruption_severities,
            rng::mix(attack_seed, 0xc0),
        )?
    };

    // Radius statistics come from the memory CSV saved by training; look
    // next to the checkpoint unless a path is given.
    let default_memory = checkpoint_path.parent().map(|d| d.join(MEMORY_FILE));
    let memory_file = memory_path
        .map(Path::to_path_buf)
        .or(default_memory.filter(|p| p.exists()));
    let eps_stats = match memory_file {
        Some(path) => {
            let history = read_memory_csv(&path)?;
            let (lo, hi) = match &cfg.iaat {
                Some(p) => (p.eps_min_255 * E255, p.eps_max_255 * E255),
                None => (0.0, 64.0 * E255),
            };
            Some(epsilon_statistics(&history, lo, hi.max(lo + E255), 32)?)
        }
        None => None,
    };

    let transfer_acc = match surrogate {
        Some(s) => {
            if s.config.fingerprint_sans_seed() != cfg.fingerprint_sans_seed() {
                return Err(CliError::Config(
                    "surrogate config differs from the target beyond the seed".into(),
                ));
            }
            let surrogate_ck = checkpoint::load(&s.checkpoint)?;
            let spec_cfg = cfg
                .eval
                .protocols
                .first()
                .expect("validated: protocols nonempty");
            let spec = spec_cfg.to_protocol().spec()?;
            Some(transfer_attack_eval(
                &ck.network,
                &surrogate_ck.network,
                &test,
                &spec,
                rng::mix(attack_seed, 0x7f),
            )?)
        }
        None => None,
    };

    let report = RunReport {
        natural_acc,
        whitebox,
        transfer_acc,
        eps_sweep,
        corruption_acc,
        eps_stats,
        config_fingerprint: cfg.fingerprint(),
    };
    report.validate(&requested)?;

    let entries: Vec<ProtocolEntry> = cfg
        .eval
        .protocols
        .iter()
        .map(|p| {
            let protocol = p.to_protocol();
            let spec = protocol.spec().expect("validated");
            ProtocolEntry {
                name: protocol.name(),
                steps: p.steps,
                restarts: p.restarts,
                epsilon_255: p.epsilon_255,
                step_size_255: spec.step_size / E255,
                targeted: p.targeted,
                stands_in_for: p.stands_in_for.clone(),
            }
        })
        .collect();
    let file = ReportFile::from_core(
        &report,
        &cfg.name,
        cfg.mode.name(),
        cfg.seed,
        attack_seed,
        entries,
    );

    let dir = report_dir
        .map(Path::to_path_buf)
        .or_else(|| checkpoint_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let report_path = dir.join(REPORT_FILE);
    file.save(&report_path)?;
    let (header, row) = file.flat_csv();
    let row_path = dir.join(REPORT_ROW_FILE);
    fs::write(&row_path, format!("{header}\n{row}\n")).map_err(|e| CliError::io(&row_path, e))?;
    Ok(report_path)
}

/// True when the run directory already holds a report for exactly this
/// config (fingerprint match), i.e. the run can be skipped.
pub fn run_is_complete(cfg: &ExperimentConfig, out_root: &Path) -> bool {
    let dir = run_dir(out_root, cfg);
    match ReportFile::load(&dir.join(REPORT_FILE)) {
        Ok(report) => report.config_fingerprint == cfg.fingerprint(),
        Err(_) => false,
    }
}

/// Train and evaluate one config unless a matching report already exists.
pub fn train_and_evaluate(cfg: &ExperimentConfig, out_root: &Path) -> Result<PathBuf> {
    let dir = run_dir(out_root, cfg);
    if run_is_complete(cfg, out_root) {
        return Ok(dir.join(REPORT_FILE));
    }
    let dir = cmd_train(cfg, out_root)?;
    cmd_evaluate(cfg, &dir.join(CHECKPOINT_FILE), None, None, None)
}

/// The full tradeoff experiment: one fixed-radius run per grid value, one
/// adaptive run, and the tradeoff scatter rendered from all reports.
/// Completed members (matching fingerprints) are skipped.
pub fn cmd_sweep(cfg: &ExperimentConfig, eps_list_255: &[f64], out_root: &Path) -> Result<PathBuf> {
    if cfg.iaat.is_none() {
        return Err(CliError::Config(
            "sweep needs an iaat block for the adaptive member".into(),
        ));
    }
    if eps_list_255.is_empty() {
        return Err(CliError::Config("sweep needs at least one epsilon".into()));
    }
    let mut report_paths = Vec::new();
    for &eps in eps_list_255 {
        if eps < 0.0 {
            return Err(CliError::Config("sweep epsilon must be >= 0".into()));
        }
        let member = cfg.sweep_member(Some(eps));
        report_paths.push(train_and_evaluate(&member, out_root)?);
    }
    let adaptive = cfg.sweep_member(None);
    report_paths.push(train_and_evaluate(&adaptive, out_root)?);

    let out = out_root.join(&cfg.name).join("tradeoff.svg");
    render(&PlotSpec {
        kind: PlotKind::TradeoffScatter,
        inputs: report_paths,
        output: out.clone(),
        protocol: None,
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{
        AttackConfig, DatasetConfig, EvalConfig, ExperimentConfig, IaatParams, ModelConfig,
        OptimizerConfig, ProtocolConfig, TrainMode,
    };
    use tempfile::tempdir;

    pub(crate) fn small_config(mode: TrainMode) -> ExperimentConfig {
        ExperimentConfig {
            name: "runner-test".into(),
            dataset: DatasetConfig::Moons {
                n_train: 48,
                n_test: 48,
                noise: 0.1,
                overlap: 0.3,
                seed: 5,
            },
            model: ModelConfig::Mlp { hidden: vec![8] },
            mode,
            epochs: 3,
            batch_size: 16,
            optimizer: OptimizerConfig {
                learning_rate: 0.2,
                weight_decay: 0.0,
                momentum: 0.9,
                decay_steps: vec![],
                decay_factor: 1.0,
            },
            training_attack: AttackConfig {
                family: "pgd".into(),
                steps: 5,
                step_size_255: 2.0,
                epsilon_255: 8.0,
                restarts: 1,
                random_init: true,
                targeted: false,
            },
            fixed_eps_255: if mode == TrainMode::FixedEps { Some(8.0) } else { None },
            iaat: if mode == TrainMode::Iaat {
                Some(IaatParams {
                    n_warm: 1,
                    eps_w_255: 8.0,
                    gamma_255: 1.9,
                    beta: 0.1,
                    eps_min_255: 0.0,
                    eps_max_255: 64.0,
                    selection_attack: None,
                })
            } else {
                None
            },
            eval: EvalConfig {
                protocols: vec![ProtocolConfig {
                    steps: 5,
                    restarts: 2,
                    epsilon_255: 8.0,
                    targeted: false,
                    stands_in_for: None,
                }],
                sweep_eps_255: vec![0.0, 8.0],
                sweep_steps: 5,
                sweep_restarts: 1,
                corruption_severities: vec![],
            },
            seed: 11,
            output_dir: None,
        }
    }

    #[test]
    fn train_writes_the_expected_artifacts() {
        let dir = tempdir().unwrap();
        let cfg = small_config(TrainMode::Iaat);
        let run = cmd_train(&cfg, dir.path()).unwrap();
        assert!(run.join(CHECKPOINT_FILE).exists());
        assert!(run.join(TRAIN_LOG_FILE).exists());
        assert!(run.join(MEMORY_FILE).exists());
        assert!(run.join(CONFIG_FILE).exists());
        let log = fs::read_to_string(run.join(TRAIN_LOG_FILE)).unwrap();
        assert_eq!(log.lines().count(), 1 + cfg.epochs);
    }

    #[test]
    fn training_is_byte_deterministic() {
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        let cfg = small_config(TrainMode::FixedEps);
        let a = cmd_train(&cfg, dir_a.path()).unwrap();
        let b = cmd_train(&cfg, dir_b.path()).unwrap();
        for file in [CHECKPOINT_FILE, TRAIN_LOG_FILE] {
            assert_eq!(
                fs::read(a.join(file)).unwrap(),
                fs::read(b.join(file)).unwrap(),
                "{file} differs"
            );
        }
    }

    #[test]
    fn clean_equals_fixed_at_zero_radius() {
        let dir = tempdir().unwrap();
        let clean = small_config(TrainMode::Clean);
        let mut fixed = small_config(TrainMode::FixedEps);
        fixed.fixed_eps_255 = Some(0.0);
        let a = cmd_train(&clean, dir.path()).unwrap();
        let b = cmd_train(&fixed, dir.path()).unwrap();
        assert_eq!(
            fs::read(a.join(CHECKPOINT_FILE)).unwrap(),
            fs::read(b.join(CHECKPOINT_FILE)).unwrap()
        );
    }

    #[test]
    fn evaluate_produces_a_complete_deterministic_report() {
        let dir = tempdir().unwrap();
        let cfg = small_config(TrainMode::FixedEps);
        let run = cmd_train(&cfg, dir.path()).unwrap();
        let p1 = cmd_evaluate(&cfg, &run.join(CHECKPOINT_FILE), None, None, None).unwrap();
        let bytes1 = fs::read(&p1).unwrap();
        let p2 = cmd_evaluate(&cfg, &run.join(CHECKPOINT_FILE), None, None, None).unwrap();
        assert_eq!(bytes1, fs::read(&p2).unwrap());
        let report = ReportFile::load(&p1).unwrap();
        assert!(report.whitebox.contains_key("PGD5x2"));
        assert_eq!(report.eps_sweep.len(), 2);
        assert!(report.natural_acc >= report.whitebox["PGD5x2"]);
    }

    #[test]
    fn transfer_requires_matching_config() {
        let dir = tempdir().unwrap();
        let cfg = small_config(TrainMode::FixedEps);
        let mut other_seed = cfg.clone();
        other_seed.seed = 99;
        let run_a = cmd_train(&cfg, dir.path()).unwrap();
        let run_b = cmd_train(&other_seed, dir.path()).unwrap();

        // Same config up to seed: accepted.
        let surrogate = SurrogateInput {
            checkpoint: run_b.join(CHECKPOINT_FILE),
            config: other_seed.clone(),
        };
        let report_path = cmd_evaluate(
            &cfg,
            &run_a.join(CHECKPOINT_FILE),
            None,
            Some(&surrogate),
            None,
        )
        .unwrap();
        assert!(ReportFile::load(&report_path).unwrap().transfer_acc.is_some());

        // Different batch size: rejected.
        let mut different = other_seed.clone();
        different.batch_size = 8;
        let bad = SurrogateInput {
            checkpoint: run_b.join(CHECKPOINT_FILE),
            config: different,
        };
        let err = cmd_evaluate(
            &cfg,
            &run_a.join(CHECKPOINT_FILE),
            None,
            Some(&bad),
            None,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sweep_is_idempotent() {
        let dir = tempdir().unwrap();
        let mut cfg = small_config(TrainMode::Iaat);
        cfg.epochs = 2;
        let svg = cmd_sweep(&cfg, &[4.0], dir.path()).unwrap();
        assert!(svg.exists());
        // Second invocation skips the members: checkpoint mtimes survive.
        let member = cfg.sweep_member(Some(4.0));
        let ck = run_dir(dir.path(), &member).join(CHECKPOINT_FILE);
        let before = fs::metadata(&ck).unwrap().modified().unwrap();
        std::thread::sleep(std::time::Duration::from_millis(20));
        cmd_sweep(&cfg, &[4.0], dir.path()).unwrap();
        let after = fs::metadata(&ck).unwrap().modified().unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn warmup_rows_in_memory_csv_hold_the_warmup_radius() {
        let dir = tempdir().unwrap();
        let mut cfg = small_config(TrainMode::Iaat);
        cfg.epochs = 7;
        cfg.iaat.as_mut().unwrap().n_warm = 5;
        let run = cmd_train(&cfg, dir.path()).unwrap();
        let history = read_memory_csv(&run.join(MEMORY_FILE)).unwrap();
        assert_eq!(history.len(), 7);
        for epoch in 0..5 {
            assert!(
                history[epoch].iter().all(|&e| (e - 8.0 * E255).abs() < 1e-12),
                "epoch {} drifted during warmup",
                epoch + 1
            );
        }
    }
}
