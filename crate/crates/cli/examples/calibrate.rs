//! Exploration harness for the moons tradeoff experiment: runs the fixed-eps
//! grid plus the adaptive runs across seeds and prints the numbers the
//! benchmark configs are tuned around. Runs are cached by fingerprint under
//! /tmp/iaat-cal, so re-invocations only recompute what changed.
//!
//! Usage: cargo run --release -p iaat-cli --example calibrate [noise] [overlap] [epochs]

use std::path::Path;

use iaat_cli::config::{ExperimentConfig, TrainMode};
use iaat_cli::report_io::ReportFile;
use iaat_cli::runner::{run_dir, train_and_evaluate, MEMORY_FILE};

include!("support/config_inc.rs");

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

    println!(
        "# noise={} overlap={} epochs={} eps_max={} sel={}x{}@{} beta={}",
        knobs.noise,
        knobs.overlap,
        knobs.epochs,
        knobs.eps_max,
        knobs.sel_steps,
        knobs.sel_restarts,
        knobs.sel_alpha,
        knobs.beta
    );
    for seed in [7u64, 8, 9] {
        println!("## seed {seed}");
        let base = base_config(&knobs, seed);
        let mut clean_cfg = base.sweep_member(Some(0.0));
        clean_cfg.mode = TrainMode::Clean;
        clean_cfg.fixed_eps_255 = None;
        let clean = ReportFile::load(&train_and_evaluate(&clean_cfg, out).unwrap()).unwrap();
        println!("clean:       nat={:.4} rob={:.4}", clean.natural_acc, clean.whitebox["PGD10x3"]);
        let mut fixed_points = Vec::new();
        for eps in 1..=8 {
            let cfg = base.sweep_member(Some(eps as f64));
            let report = ReportFile::load(&train_and_evaluate(&cfg, out).unwrap()).unwrap();
            println!(
                "fixed eps={eps}: nat={:.4} rob={:.4} rob50={:.4}",
                report.natural_acc, report.whitebox["PGD10x3"], report.whitebox["PGD50x2"]
            );
            fixed_points.push((report.whitebox["PGD10x3"], report.natural_acc, report));
        }
        let iaat_cfg = base.sweep_member(None);
        let iaat = ReportFile::load(&train_and_evaluate(&iaat_cfg, out).unwrap()).unwrap();
        println!(
            "iaat(warm): nat={:.4} rob={:.4} rob50={:.4}",
            iaat.natural_acc, iaat.whitebox["PGD10x3"], iaat.whitebox["PGD50x2"]
        );
        let mem = run_dir(out, &iaat_cfg).join(MEMORY_FILE);
        let history = iaat_cli::memcsv::read_memory_csv(&mem).unwrap();
        let stats = iaat_core::eval::epsilon_statistics(&history, 0.0, 64.0 / 255.0, 32).unwrap();
        let warm_end = 4; // 0-based snapshot index of warmup end (n_warm=5)
        println!(
            "iaat eps: mean_255={:.2} std_255={:.2} warmend(mean={:.2},std={:.2})",
            stats.mean / (1.0 / 255.0),
            stats.std / (1.0 / 255.0),
            stats.per_epoch_mean[warm_end] / (1.0 / 255.0),
            stats.per_epoch_std[warm_end] / (1.0 / 255.0),
        );

        let mut nowarm_cfg = iaat_cfg.clone();
        nowarm_cfg.iaat.as_mut().unwrap().n_warm = 0;
        let nowarm = ReportFile::load(&train_and_evaluate(&nowarm_cfg, out).unwrap()).unwrap();
        println!(
            "iaat(nowarm): nat={:.4} rob={:.4}",
            nowarm.natural_acc, nowarm.whitebox["PGD10x3"]
        );

        // Frontier comparison at the adaptive run's robustness.
        let frontier = frontier_value(
            &fixed_points
                .iter()
                .map(|(r, n, _)| (*r, *n))
                .collect::<Vec<_>>(),
            iaat.whitebox["PGD10x3"],
        );
        println!(
            "frontier @rob={:.4}: {:.4} -> iaat gain {:+.2} points",
            iaat.whitebox["PGD10x3"],
            frontier,
            (iaat.natural_acc - frontier) * 100.0
        );

        // Sweep crossing summary.
        let fixed2 = &fixed_points[1].2;
        let fixed8 = &fixed_points[7].2;
        print!("sweep  eps: ");
        for p in &fixed2.eps_sweep {
            print!("{:>6.1}", p.epsilon_255);
        }
        println!();
        for (tag, rep) in [("f2", fixed2), ("f8", fixed8), ("ia", &iaat)] {
            print!("sweep {tag}: ");
            for p in &rep.eps_sweep {
                print!("{:>6.3}", p.robust_acc);
            }
            println!();
        }
    }
}

/// Piecewise-linear interpolation of the pareto-filtered fixed-eps points,
/// clamped to the nearest endpoint outside the range.
fn frontier_value(points: &[(f64, f64)], robust: f64) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Upper envelope: keep points not dominated by any other.
    let pareto: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(r, n)| !pts.iter().any(|(r2, n2)| (r2 > r && n2 >= n) || (r2 >= r && n2 > n)))
        .cloned()
        .collect();
    if robust <= pareto[0].0 {
        return pareto[0].1;
    }
    if robust >= pareto[pareto.len() - 1].0 {
        return pareto[pareto.len() - 1].1;
    }
    for w in pareto.windows(2) {
        if robust >= w[0].0 && robust <= w[1].0 {
            let t = (robust - w[0].0) / (w[1].0 - w[0].0).max(1e-12);
            return w[0].1 + t * (w[1].1 - w[0].1);
        }
    }
    pareto[pareto.len() - 1].1
}
