//! Dataset IO: IDX-format ingestion, CSV export, and building the train and
//! test splits an experiment config describes.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use iaat_core::data::{make_linear_oracle, make_overlap_moons, LabeledDataset};
use iaat_core::rng;
use iaat_core::Tensor;

use crate::config::{DatasetConfig, E255};
use crate::error::{CliError, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn idx_err(path: &Path, offset: u64, what: &str) -> CliError {
    CliError::Config(format!("{} at byte {}: {}", path.display(), offset, what))
}

fn read_u32(cur: &mut Cursor<Vec<u8>>, path: &Path, what: &str) -> Result<u32> {
    let offset = cur.position();
    cur.read_u32::<BigEndian>()
        .map_err(|_| idx_err(path, offset, &format!("truncated file while reading {what}")))
}

/// Parse an IDX image file (magic 0x00000803, big-endian dims) into
/// row-major `[1, rows, cols]` tensors scaled to `[0, 1]`.
pub fn read_idx_images(path: &Path, limit: Option<usize>) -> Result<Vec<Tensor>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut cur = Cursor::new(bytes);
    let magic = read_u32(&mut cur, path, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(idx_err(path, 0, &format!("bad image magic 0x{magic:08x}")));
    }
    let count = read_u32(&mut cur, path, "item count")? as usize;
    let rows = read_u32(&mut cur, path, "rows")? as usize;
    let cols = read_u32(&mut cur, path, "cols")? as usize;
    let take = limit.map(|l| l.min(count)).unwrap_or(count);
    let mut images = Vec::with_capacity(take);
    let data = cur.into_inner();
    let mut offset = 16usize;
    for i in 0..take {
        let end = offset + rows * cols;
        if end > data.len() {
            return Err(idx_err(path, offset as u64, &format!("truncated image {i}")));
        }
        let pixels: Vec<f64> = data[offset..end].iter().map(|&b| b as f64 / 255.0).collect();
        images.push(Tensor::new(vec![1, rows, cols], pixels)?);
        offset = end;
    }
    Ok(images)
}

/// Parse an IDX label file (magic 0x00000801).
pub fn read_idx_labels(path: &Path, limit: Option<usize>) -> Result<Vec<usize>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut cur = Cursor::new(bytes);
    let magic = read_u32(&mut cur, path, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(idx_err(path, 0, &format!("bad label magic 0x{magic:08x}")));
    }
    let count = read_u32(&mut cur, path, "item count")? as usize;
    let take = limit.map(|l| l.min(count)).unwrap_or(count);
    let data = cur.into_inner();
    if 8 + take > data.len() {
        return Err(idx_err(path, data.len() as u64, "truncated label data"));
    }
    Ok(data[8..8 + take].iter().map(|&b| b as usize).collect())
}

/// Load an image/label IDX pair as a dataset; truncation to `limit`
/// preserves file order.
pub fn load_idx_images(images: &Path, labels: &Path, limit: Option<usize>) -> Result<LabeledDataset> {
    let imgs = read_idx_images(images, limit)?;
    let labs = read_idx_labels(labels, limit)?;
    if imgs.len() != labs.len() {
        return Err(CliError::Config(format!(
            "idx pair mismatch: {} images vs {} labels",
            imgs.len(),
            labs.len()
        )));
    }
    let n_classes = labs.iter().copied().max().unwrap_or(0).max(1) + 1;
    Ok(LabeledDataset::new("idx", n_classes, imgs, labs)?)
}

/// Flat CSV export: `sample_index,label,px0,px1,...`.
pub fn export_dataset_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let dim: usize = ds.sample_shape().iter().product();
    let mut out = String::new();
    out.push_str("sample_index,label");
    for i in 0..dim {
        out.push_str(&format!(",px{i}"));
    }
    out.push('\n');
    for i in 0..ds.len() {
        let (x, label) = ds.sample(i);
        out.push_str(&format!("{i},{label}"));
        for v in x.data() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// Take a contiguous slice of a dataset as its own dataset with dense
/// re-based sample indices; margins follow along.
fn slice_dataset(ds: &LabeledDataset, from: usize, to: usize, name: &str) -> Result<LabeledDataset> {
    let samples: Vec<Tensor> = (from..to).map(|i| ds.sample(i).0.clone()).collect();
    let labels: Vec<usize> = (from..to).map(|i| ds.sample(i).1).collect();
    let mut out = LabeledDataset::new(name, ds.n_classes, samples, labels)?;
    if let Some(m) = ds.margins() {
        out = out.with_margins(m[from..to].to_vec())?;
    }
    Ok(out)
}

/// Materialize the train/test splits of a dataset config.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    match cfg {
        DatasetConfig::Moons { n_train, n_test, noise, overlap, seed } => {
            let train = make_overlap_moons(*n_train, *noise, *overlap, *seed)?;
            let test =
                make_overlap_moons(*n_test, *noise, *overlap, rng::mix(*seed, 0x7e57))?;
            Ok((train, test))
        }
        DatasetConfig::LinearOracle {
            n_train,
            n_test,
            dim,
            weight_seed,
            margin_lo_255,
            margin_hi_255,
        } => {
            // One generation over a single hyperplane, split by index.
            let (all, _) = make_linear_oracle(
                n_train + n_test,
                *dim,
                *weight_seed,
                margin_lo_255 * E255,
                margin_hi_255 * E255,
            )?;
            let train = slice_dataset(&all, 0, *n_train, "linear-oracle-train")?;
            let test = slice_dataset(&all, *n_train, n_train + n_test, "linear-oracle-test")?;
            Ok((train, test))
        }
        DatasetConfig::Idx { train_images, train_labels, test_images, test_labels, limit } => {
            let train =
                load_idx_images(Path::new(train_images), Path::new(train_labels), *limit)?;
            let test = load_idx_images(Path::new(test_images), Path::new(test_labels), *limit)?;
            Ok((train, test))
        }
    }
}
