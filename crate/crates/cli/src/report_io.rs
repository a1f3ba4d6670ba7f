//! RunReport serialization: canonical JSON (fixed key order) and a flat CSV
//! row for cross-run aggregation. Radii appear in `/255` units.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use iaat_core::eval::{EpsStats, RunReport};

use crate::config::E255;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProtocolEntry {
    pub name: String,
    pub steps: usize,
    pub restarts: usize,
    pub epsilon_255: f64,
    pub step_size_255: f64,
    pub targeted: bool,
    /// Full-scale protocol this desk-scale entry stands in for, if any.
    pub stands_in_for: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepPoint {
    pub epsilon_255: f64,
    pub robust_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HistogramBinFile {
    pub lo_255: f64,
    pub hi_255: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpsStatsFile {
    pub mean_255: f64,
    pub std_255: f64,
    pub histogram: Vec<HistogramBinFile>,
    pub per_epoch_mean_255: Vec<f64>,
    pub per_epoch_std_255: Vec<f64>,
}

impl From<&EpsStats> for EpsStatsFile {
    fn from(s: &EpsStats) -> Self {
        Self {
            mean_255: s.mean / E255,
            std_255: s.std / E255,
            histogram: s
                .histogram
                .iter()
                .map(|b| HistogramBinFile { lo_255: b.lo / E255, hi_255: b.hi / E255, count: b.count })
                .collect(),
            per_epoch_mean_255: s.per_epoch_mean.iter().map(|m| m / E255).collect(),
            per_epoch_std_255: s.per_epoch_std.iter().map(|m| m / E255).collect(),
        }
    }
}

/// The on-disk report. Field order here defines the canonical JSON order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportFile {
    pub config_fingerprint: String,
    pub run_name: String,
    pub mode: String,
    pub seed: u64,
    /// Attack seed used for every evaluation protocol, recorded so runs can
    /// be replayed exactly.
    pub attack_seed: u64,
    /// Desk-scale protocol table, with the full-scale protocols they stand
    /// in for documented side by side.
    pub protocols: Vec<ProtocolEntry>,
    pub natural_acc: f64,
    pub whitebox: BTreeMap<String, f64>,
    pub transfer_acc: Option<f64>,
    pub eps_sweep: Vec<SweepPoint>,
    pub corruption_acc: BTreeMap<String, f64>,
    pub eps_stats: Option<EpsStatsFile>,
}

impl ReportFile {
    pub fn from_core(
        report: &RunReport,
        run_name: &str,
        mode: &str,
        seed: u64,
        attack_seed: u64,
        protocols: Vec<ProtocolEntry>,
    ) -> Self {
        Self {
            config_fingerprint: report.config_fingerprint.clone(),
            run_name: run_name.to_string(),
            mode: mode.to_string(),
            seed,
            attack_seed,
            protocols,
            natural_acc: report.natural_acc,
            whitebox: report.whitebox.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            transfer_acc: report.transfer_acc,
            eps_sweep: report
                .eps_sweep
                .iter()
                .map(|&(e, a)| SweepPoint { epsilon_255: e / E255, robust_acc: a })
                .collect(),
            corruption_acc: report.corruption_acc.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            eps_stats: report.eps_stats.as_ref().map(EpsStatsFile::from),
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.canonical_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))
    }

    /// Flat `(header, row)` pair; protocol and sweep columns are derived
    /// from the report content in deterministic order.
    pub fn flat_csv(&self) -> (String, String) {
        let mut header = vec![
            "config_fingerprint".to_string(),
            "run_name".to_string(),
            "mode".to_string(),
            "seed".to_string(),
            "natural_acc".to_string(),
        ];
        let mut row = vec![
            self.config_fingerprint.clone(),
            self.run_name.clone(),
            self.mode.clone(),
            self.seed.to_string(),
            self.natural_acc.to_string(),
        ];
        for (name, acc) in &self.whitebox {
            header.push(format!("whitebox_{name}"));
            row.push(acc.to_string());
        }
        header.push("transfer_acc".to_string());
        row.push(self.transfer_acc.map(|v| v.to_string()).unwrap_or_default());
        for point in &self.eps_sweep {
            header.push(format!("sweep_{}", point.epsilon_255));
            row.push(point.robust_acc.to_string());
        }
        for (kind, acc) in &self.corruption_acc {
            header.push(format!("corruption_{kind}"));
            row.push(acc.to_string());
        }
        if let Some(stats) = &self.eps_stats {
            header.push("eps_mean_255".to_string());
            row.push(stats.mean_255.to_string());
            header.push("eps_std_255".to_string());
            row.push(stats.std_255.to_string());
        }
        (header.join(","), row.join(","))
    }
}
