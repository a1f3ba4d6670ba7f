//! Per-band breakdown for cached calibration runs: natural accuracy of each
//! trained model by distance-to-enemy band, plus where the adaptive radii
//! settle per band. Reads the run cache written by the calibrate example.
//!
//! Usage: cargo run --release -p iaat-cli --example diagnose [same args as calibrate]

use std::path::Path;

use iaat_cli::checkpoint;
use iaat_cli::config::{ExperimentConfig, TrainMode, E255};
use iaat_cli::data_io::build_dataset;
use iaat_cli::memcsv::read_memory_csv;
use iaat_cli::runner::{run_dir, CHECKPOINT_FILE, MEMORY_FILE};
use iaat_core::data::LabeledDataset;
use iaat_core::loss::predictions;

include!("support/config_inc.rs");

const BANDS: [(f64, f64); 4] = [(0.0, 4.0), (4.0, 8.0), (8.0, 16.0), (16.0, 1e9)];

fn enemy_distance_255(ds: &LabeledDataset, x: &[f64], label: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..ds.len() {
        let (t, l) = ds.sample(i);
        if l == label {
            continue;
        }
        let d = t
            .data()
            .iter()
            .zip(x)
            .take(2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        best = best.min(d);
    }
    best / E255
}

fn band_of(d: f64) -> usize {
    BANDS.iter().position(|&(lo, hi)| d >= lo && d < hi).unwrap_or(BANDS.len() - 1)
}

fn band_accuracy(cfg: &ExperimentConfig, out: &Path, train: &LabeledDataset, test: &LabeledDataset, test_bands: &[usize]) {
    let ck = checkpoint::load(&run_dir(out, cfg).join(CHECKPOINT_FILE)).unwrap();
    let mut correct = [0usize; 4];
    let mut total = [0usize; 4];
    for chunk in test.index_chunks(512) {
        let (x, labels, idx) = test.batch(&chunk).unwrap();
        let preds = predictions(&ck.network.forward(&x).unwrap());
        for (pos, &i) in idx.iter().enumerate() {
            let b = test_bands[i];
            total[b] += 1;
            if preds[pos] == labels[pos] {
                correct[b] += 1;
            }
        }
    }
    let label = match cfg.mode {
        TrainMode::Iaat => {
            if cfg.iaat.as_ref().unwrap().n_warm == 0 { "ia(nowarm)".to_string() } else { "ia(warm)".to_string() }
        }
        TrainMode::Clean => "clean".to_string(),
        TrainMode::FixedEps => format!("fixed-{}", cfg.fixed_eps_255.unwrap()),
    };
    print!("{label:>12}: ");
    for b in 0..4 {
        print!(
            "band{}[{:>3}]={:.3}  ",
            b,
            total[b],
            correct[b] as f64 / total[b].max(1) as f64
        );
    }
    if cfg.mode == TrainMode::Iaat {
        let history = read_memory_csv(&run_dir(out, cfg).join(MEMORY_FILE)).unwrap();
        let last = history.last().unwrap();
        let mut sums = [0.0f64; 4];
        let mut counts = [0usize; 4];
        for i in 0..train.len() {
            let (x, l) = train.sample(i);
            let b = band_of(enemy_distance_255(train, x.data(), l));
            sums[b] += last[i] / E255;
            counts[b] += 1;
        }
        print!("| eps/band: ");
        for b in 0..4 {
            print!("{:.1} ", sums[b] / counts[b].max(1) as f64);
        }
    }
    println!();
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let knobs = Knobs {
        noise: arg(1, 0.12),
        overlap: arg(2, 0.4),
        epochs: arg(3, 60.0) as usize,
        eps_max: arg(4, 64.0),
        sel_steps: arg(5, 10.0) as usize,
        sel_alpha: arg(6, 2.0),
        sel_restarts: arg(7, 1.0) as usize,
        beta: arg(8, 0.1),
        width: arg(9, 32.0) as usize,
        n_train: arg(10, 512.0) as usize,
    };
    let out = Path::new("/tmp/iaat-cal");
    for seed in [7u64] {
        let base = base_config(&knobs, seed);
        let (train, test) = build_dataset(&base.dataset).unwrap();
        let test_bands: Vec<usize> = (0..test.len())
            .map(|i| {
                let (x, l) = test.sample(i);
                band_of(enemy_distance_255(&train, x.data(), l))
            })
            .collect();
        println!("# seed {seed}: band counts by distance-to-enemy (/255): {BANDS:?}");

        let mut clean_cfg = base.sweep_member(Some(0.0));
        clean_cfg.mode = TrainMode::Clean;
        clean_cfg.fixed_eps_255 = None;
        band_accuracy(&clean_cfg, out, &train, &test, &test_bands);
        for eps in [2.0, 5.0, 8.0] {
            band_accuracy(&base.sweep_member(Some(eps)), out, &train, &test, &test_bands);
        }
        band_accuracy(&base.sweep_member(None), out, &train, &test, &test_bands);
    }
}
