//! Epsilon-memory checkpoints: one CSV holding a `(sample_index,
//! epsilon_255)` table per saved epoch, keyed by a 1-based epoch column.

use std::fs;
use std::path::Path;

use crate::config::E255;
use crate::error::{CliError, Result};

pub const MEM_CSV_HEADER: &str = "epoch,sample_index,epsilon_255";

/// Write per-epoch memory snapshots; epochs are numbered from 1.
pub fn write_memory_csv(path: &Path, history: &[Vec<f64>]) -> Result<()> {
    let mut out = String::from(MEM_CSV_HEADER);
    out.push('\n');
    for (e, snap) in history.iter().enumerate() {
        for (i, eps) in snap.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", e + 1, i, eps / E255));
        }
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Read snapshots back, in epoch order, radii converted to pixel units.
pub fn read_memory_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MEM_CSV_HEADER => {}
        other => {
            return Err(CliError::Config(format!(
                "{}: expected header '{}', got {:?}",
                path.display(),
                MEM_CSV_HEADER,
                other
            )))
        }
    }
    let mut history: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_err = |what: &str| {
            CliError::Config(format!("{}:{}: bad {}", path.display(), lineno + 2, what))
        };
        let epoch: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("epoch"))?;
        let index: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("sample_index"))?;
        let eps_255: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("epsilon_255"))?;
        if epoch == 0 || epoch > history.len() + 1 {
            return Err(parse_err("epoch ordering"));
        }
        if epoch == history.len() + 1 {
            history.push(Vec::new());
        }
        let snap = &mut history[epoch - 1];
        if index != snap.len() {
            return Err(parse_err("sample ordering"));
        }
        snap.push(eps_255 * E255);
    }
    if history.is_empty() {
        return Err(CliError::Config(format!("{}: no snapshots", path.display())));
    }
    Ok(history)
}
