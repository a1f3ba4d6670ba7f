//! Model checkpoints: a versioned JSON container holding the architecture,
//! the flat parameter array as little-endian 64-bit floats (base64), the run
//! seed and the epoch count. Round trips are bit-exact.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use iaat_core::network::{LayerSpec, Network};

use crate::error::{CliError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerFile {
    Dense { input: usize, output: usize },
    Relu,
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize, padding: usize },
    Flatten,
}

impl From<&LayerSpec> for LayerFile {
    fn from(spec: &LayerSpec) -> Self {
        match *spec {
            LayerSpec::Dense { input, output } => LayerFile::Dense { input, output },
            LayerSpec::Relu => LayerFile::Relu,
            LayerSpec::Conv2d { in_channels, out_channels, kernel, padding } => {
                LayerFile::Conv2d { in_channels, out_channels, kernel, padding }
            }
            LayerSpec::Flatten => LayerFile::Flatten,
        }
    }
}

impl From<&LayerFile> for LayerSpec {
    fn from(file: &LayerFile) -> Self {
        match *file {
            LayerFile::Dense { input, output } => LayerSpec::Dense { input, output },
            LayerFile::Relu => LayerSpec::Relu,
            LayerFile::Conv2d { in_channels, out_channels, kernel, padding } => {
                LayerSpec::Conv2d { in_channels, out_channels, kernel, padding }
            }
            LayerFile::Flatten => LayerSpec::Flatten,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    input_shape: Vec<usize>,
    layers: Vec<LayerFile>,
    seed: u64,
    epoch: usize,
    /// Flat parameters, little-endian f64, base64.
    params_b64: String,
}

/// A trained model with its provenance.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network,
    pub seed: u64,
    pub epoch: usize,
}

pub fn save(path: &Path, net: &Network, seed: u64, epoch: usize) -> Result<()> {
    let params = net.params_flat();
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for p in &params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        input_shape: net.input_shape().to_vec(),
        layers: net.arch().iter().map(LayerFile::from).collect(),
        seed,
        epoch,
        params_b64: B64.encode(bytes),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Config(format!("checkpoint serialization: {e}")))?;
    fs::write(path, json).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CliError::Config(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            file.version
        )));
    }
    let arch: Vec<LayerSpec> = file.layers.iter().map(LayerSpec::from).collect();
    let mut network = Network::from_arch(file.input_shape, &arch)?;
    let bytes = B64
        .decode(&file.params_b64)
        .map_err(|e| CliError::Config(format!("{}: bad params encoding: {e}", path.display())))?;
    if bytes.len() % 8 != 0 {
        return Err(CliError::Config(format!(
            "{}: parameter byte count {} not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    network.set_params_flat(&params)?;
    if !params.iter().all(|p| p.is_finite()) {
        return Err(CliError::Numeric(format!(
            "{}: checkpoint contains non-finite parameters",
            path.display()
        )));
    }
    Ok(Checkpoint { network, seed: file.seed, epoch: file.epoch })
}
