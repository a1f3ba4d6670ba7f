//! Experiment configuration: JSON schema, validation, fingerprinting.
//!
//! Experiments are described by a JSON file rather than flags; the command
//! line only picks the subcommand, the config path and seed/output
//! overrides. The fingerprint is the SHA-256 of the canonical serialization
//! of the effective config, so artifacts on disk are traceable to exactly
//! one configuration. Radii and step sizes live in the `/255` convention in
//! files and are converted to `[0, 1]` pixel units at the boundary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use iaat_core::adaptive::IaatConfig;
use iaat_core::attack::{AttackFamily, AttackSpec};
use iaat_core::eval::Protocol;
use iaat_core::optim::SgdOptimizer;

use crate::error::{CliError, Result};

pub const E255: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// Two interleaved crescents with tunable class overlap.
    Moons { n_train: usize, n_test: usize, noise: f64, overlap: f64, seed: u64 },
    /// Hyperplane-labeled samples with exactly known l-inf margins
    /// (uniform in `[margin_lo_255, margin_hi_255] / 255`).
    LinearOracle {
        n_train: usize,
        n_test: usize,
        dim: usize,
        weight_seed: u64,
        margin_lo_255: f64,
        margin_hi_255: f64,
    },
    /// IDX-format image/label file pairs (the MNIST container format).
    Idx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
        #[serde(default)]
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvLayerConfig {
    pub channels: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Mlp { hidden: Vec<usize> },
    Conv { layers: Vec<ConvLayerConfig> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Clean,
    FixedEps,
    Iaat,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Clean => "clean",
            TrainMode::FixedEps => "fixed_eps",
            TrainMode::Iaat => "iaat",
        }
    }
}

/// Attack description in file units (`/255`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AttackConfig {
    /// "pgd" or "fgsm".
    pub family: String,
    pub steps: usize,
    pub step_size_255: f64,
    pub epsilon_255: f64,
    pub restarts: usize,
    pub random_init: bool,
    pub targeted: bool,
}

impl AttackConfig {
    pub fn to_spec(&self) -> Result<AttackSpec> {
        let family = match self.family.as_str() {
            "pgd" => AttackFamily::Pgd,
            "fgsm" => AttackFamily::Fgsm,
            other => {
                return Err(CliError::Config(format!(
                    "unknown attack family '{other}' (expected pgd or fgsm)"
                )))
            }
        };
        let spec = AttackSpec {
            family,
            steps: self.steps,
            step_size: self.step_size_255 * E255,
            epsilon: self.epsilon_255 * E255,
            restarts: self.restarts,
            random_init: self.random_init,
            targeted: self.targeted,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &AttackSpec) -> Self {
        Self {
            family: match spec.family {
                AttackFamily::Pgd => "pgd".into(),
                AttackFamily::Fgsm => "fgsm".into(),
            },
            steps: spec.steps,
            step_size_255: spec.step_size / E255,
            epsilon_255: spec.epsilon / E255,
            restarts: spec.restarts,
            random_init: spec.random_init,
            targeted: spec.targeted,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub decay_steps: Vec<usize>,
    pub decay_factor: f64,
}

impl OptimizerConfig {
    pub fn build(&self) -> Result<SgdOptimizer> {
        Ok(SgdOptimizer::new(
            self.learning_rate,
            self.weight_decay,
            self.decay_steps.clone(),
            self.decay_factor,
            self.momentum,
        )?)
    }
}

/// Adaptive-training parameters in file units.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IaatParams {
    pub n_warm: usize,
    pub eps_w_255: f64,
    pub gamma_255: f64,
    pub beta: f64,
    pub eps_min_255: f64,
    pub eps_max_255: f64,
    /// Attack used to probe candidate radii; defaults to the training
    /// attack when absent.
    #[serde(default)]
    pub selection_attack: Option<AttackConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProtocolConfig {
    pub steps: usize,
    pub restarts: usize,
    pub epsilon_255: f64,
    #[serde(default)]
    pub targeted: bool,
    /// Full-scale protocol this desk-scale protocol stands in for, e.g.
    /// "PGD100x5"; documentation only.
    #[serde(default)]
    pub stands_in_for: Option<String>,
}

impl ProtocolConfig {
    pub fn to_protocol(&self) -> Protocol {
        Protocol {
            steps: self.steps,
            restarts: self.restarts,
            epsilon: self.epsilon_255 * E255,
            targeted: self.targeted,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalConfig {
    pub protocols: Vec<ProtocolConfig>,
    #[serde(default)]
    pub sweep_eps_255: Vec<f64>,
    /// Sweep protocol shape; `(steps, restarts)`.
    #[serde(default = "default_sweep_steps")]
    pub sweep_steps: usize,
    #[serde(default = "default_sweep_restarts")]
    pub sweep_restarts: usize,
    /// Corruption severities to average over; empty disables the suite.
    #[serde(default)]
    pub corruption_severities: Vec<u8>,
}

fn default_sweep_steps() -> usize {
    10
}

fn default_sweep_restarts() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub training_attack: AttackConfig,
    /// Radius for `fixed_eps` mode.
    #[serde(default)]
    pub fixed_eps_255: Option<f64>,
    /// Adaptive-training parameters for `iaat` mode.
    #[serde(default)]
    pub iaat: Option<IaatParams>,
    pub eval: EvalConfig,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Validate everything up front; no compute happens on a bad config.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(CliError::Config("name must not be empty".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CliError::Config("epochs and batch_size must be >= 1".into()));
        }
        match self.dataset {
            DatasetConfig::Moons { n_train, n_test, noise, .. } => {
                if n_train < 2 || n_test < 2 {
                    return Err(CliError::Config("moons needs n_train, n_test >= 2".into()));
                }
                if noise < 0.0 {
                    return Err(CliError::Config("moons noise must be >= 0".into()));
                }
            }
            DatasetConfig::LinearOracle {
                n_train,
                n_test,
                dim,
                margin_lo_255,
                margin_hi_255,
                ..
            } => {
                if n_train < 2 || n_test < 1 {
                    return Err(CliError::Config("linear oracle needs n_train >= 2".into()));
                }
                if dim < 2 {
                    return Err(CliError::Config("linear oracle needs dim >= 2".into()));
                }
                if !(0.0 <= margin_lo_255 && margin_lo_255 <= margin_hi_255) {
                    return Err(CliError::Config(
                        "need 0 <= margin_lo_255 <= margin_hi_255".into(),
                    ));
                }
            }
            DatasetConfig::Idx { .. } => {}
        }
        match &self.model {
            ModelConfig::Mlp { hidden } => {
                if hidden.len() > 3 {
                    return Err(CliError::Config("mlp supports at most 3 hidden layers".into()));
                }
            }
            ModelConfig::Conv { layers } => {
                if layers.is_empty() || layers.len() > 2 {
                    return Err(CliError::Config("conv model needs 1..=2 conv layers".into()));
                }
            }
        }
        self.optimizer.build()?;
        self.training_attack.to_spec()?;
        match self.mode {
            TrainMode::FixedEps => {
                let eps = self.fixed_eps_255.ok_or_else(|| {
                    CliError::Config("fixed_eps mode needs fixed_eps_255".into())
                })?;
                if eps < 0.0 {
                    return Err(CliError::Config("fixed_eps_255 must be >= 0".into()));
                }
            }
            TrainMode::Iaat => {
                let params = self
                    .iaat
                    .as_ref()
                    .ok_or_else(|| CliError::Config("iaat mode needs the iaat block".into()))?;
                self.iaat_config(params)?.validate()?;
            }
            TrainMode::Clean => {}
        }
        if self.eval.protocols.is_empty() {
            return Err(CliError::Config("eval.protocols must not be empty".into()));
        }
        for p in &self.eval.protocols {
            if p.steps == 0 || p.restarts == 0 || p.epsilon_255 < 0.0 {
                return Err(CliError::Config("protocol needs steps, restarts >= 1, eps >= 0".into()));
            }
        }
        for &s in &self.eval.corruption_severities {
            if !(1..=5).contains(&s) {
                return Err(CliError::Config("corruption severities must be 1..=5".into()));
            }
        }
        Ok(())
    }

    fn iaat_config(&self, params: &IaatParams) -> Result<IaatConfig> {
        let selection_attack = match &params.selection_attack {
            Some(cfg) => cfg.to_spec()?,
            None => self.training_attack.to_spec()?,
        };
        Ok(IaatConfig {
            n_iter: self.epochs,
            n_warm: params.n_warm,
            eps_w: params.eps_w_255 * E255,
            gamma: params.gamma_255 * E255,
            beta: params.beta,
            selection_attack,
            training_attack: self.training_attack.to_spec()?,
            eps_min: params.eps_min_255 * E255,
            eps_max: params.eps_max_255 * E255,
        })
    }

    /// The adaptive-loop configuration (iaat mode only).
    pub fn build_iaat(&self) -> Result<IaatConfig> {
        let params = self
            .iaat
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no iaat block".into()))?;
        self.iaat_config(params)
    }

    /// Training attack with the mode's radius applied (`fixed_eps` radius
    /// override, zero radius for clean training).
    pub fn effective_training_attack(&self) -> Result<AttackSpec> {
        let spec = self.training_attack.to_spec()?;
        Ok(match self.mode {
            TrainMode::Clean => spec.with_epsilon(0.0),
            TrainMode::FixedEps => {
                spec.with_epsilon(self.fixed_eps_255.unwrap_or(0.0) * E255)
            }
            TrainMode::Iaat => spec,
        })
    }

    /// Canonical serialization; field order is fixed by the struct.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization of the full config.
    pub fn fingerprint(&self) -> String {
        hex_digest(self.canonical_json().as_bytes())
    }

    /// Fingerprint with the run seed zeroed; two runs that differ only in
    /// seed (e.g. a transfer surrogate) share this value.
    pub fn fingerprint_sans_seed(&self) -> String {
        let mut copy = self.clone();
        copy.seed = 0;
        hex_digest(copy.canonical_json().as_bytes())
    }

    /// Derived config for one member of a sweep.
    pub fn sweep_member(&self, eps_255: Option<f64>) -> Self {
        let mut cfg = self.clone();
        match eps_255 {
            Some(e) => {
                cfg.mode = TrainMode::FixedEps;
                cfg.fixed_eps_255 = Some(e);
                cfg.iaat = None;
            }
            None => {
                cfg.mode = TrainMode::Iaat;
                cfg.fixed_eps_255 = None;
            }
        }
        cfg
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
