//! Upper-bound probe: adversarial training with per-sample radii fixed at
//! the true distance-to-nearest-enemy (clamped), bypassing radius selection
//! entirely. Tells how much an ideal instance-adaptive assignment could gain
//! on the current benchmark geometry.
//!
//! Usage: cargo run --release -p iaat-cli --example oracle_radii [noise] [overlap] [epochs] [cap] [n_train]

use iaat_cli::config::E255;
use iaat_core::adaptive::{train_epoch_fixed, EpochStats};
use iaat_core::attack::{attack_batch_auto_targets, evaluate_robust_accuracy, AttackSpec};
use iaat_core::data::{make_overlap_moons, LabeledDataset};
use iaat_core::eval::natural_accuracy;
use iaat_core::loss::{argmax, cross_entropy_batch};
use iaat_core::network::Network;
use iaat_core::optim::SgdOptimizer;
use iaat_core::rng::{self, Stream};

fn enemy_distance(ds: &LabeledDataset, i: usize) -> f64 {
    let (x, label) = ds.sample(i);
    let mut best = f64::INFINITY;
    for j in 0..ds.len() {
        let (t, l) = ds.sample(j);
        if l == label {
            continue;
        }
        let d = t
            .data()
            .iter()
            .zip(x.data())
            .take(2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        best = best.min(d);
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn train_epoch_oracle(
    net: &mut Network,
    opt: &mut SgdOptimizer,
    ds: &LabeledDataset,
    eps: &[f64],
    attack: &AttackSpec,
    batch_size: usize,
    epoch: usize,
    run_seed: u64,
    split: bool,
) -> EpochStats {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut r = rng::chacha(rng::epoch_seed(run_seed, Stream::Shuffle, epoch));
    rng::shuffle(&mut r, &mut order);
    let mut loss_sum = 0.0;
    for chunk in order.chunks(batch_size) {
        let (x, labels, idx) = ds.batch(chunk).unwrap();
        let e: Vec<f64> = idx.iter().map(|&i| eps[i]).collect();
        let seeds: Vec<u64> = idx
            .iter()
            .map(|&i| rng::sample_seed(run_seed, Stream::TrainAttack, epoch, i))
            .collect();
        let adv = attack_batch_auto_targets(net, &x, &labels, &e, attack, &seeds).unwrap();
        let mut mixed = adv.adversarial.clone();
        if split {
            let clean_logits = net.forward(&x).unwrap();
            for (pos, &label) in labels.iter().enumerate() {
                if argmax(clean_logits.sample(pos)) != label {
                    mixed.sample_mut(pos).copy_from_slice(x.sample(pos));
                }
            }
        }
        let (trace, logits) = net.forward_with_trace(&mixed).unwrap();
        let (losses, mut dl) = cross_entropy_batch(&logits, &labels).unwrap();
        let scale = 1.0 / labels.len() as f64;
        for g in dl.data_mut() {
            *g *= scale;
        }
        let (grads, _) = net.backward(&trace, &dl);
        opt.step(net, &grads, epoch).unwrap();
        loss_sum += losses.iter().sum::<f64>() * scale;
    }
    EpochStats {
        mean_loss: loss_sum,
        clean_accuracy: 0.0,
        applied_eps: eps.to_vec(),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let noise = arg(1, 0.1);
    let overlap = arg(2, 0.35);
    let epochs = arg(3, 100.0) as usize;
    let cap = arg(4, 12.0) * E255;
    let n_train = arg(5, 2048.0) as usize;

    for seed in [7u64, 8, 9] {
        let train = make_overlap_moons(n_train, noise, overlap, 1).unwrap();
        let test = make_overlap_moons(1024, noise, overlap, rng::mix(1, 0x7e57)).unwrap();
        let oracle_eps: Vec<f64> =
            (0..train.len()).map(|i| enemy_distance(&train, i).min(cap)).collect();

        let attack = AttackSpec::pgd(10, 2.0 * E255, 8.0 * E255).unwrap();
        let decay = vec![epochs * 2 / 3, epochs * 5 / 6];

        // Oracle radii with the batch split.
        let dim: usize = train.sample_shape().iter().product();
        let mut net = Network::mlp(dim, &[32, 32], 2, seed).unwrap();
        let mut opt = SgdOptimizer::new(0.1, 0.0002, decay.clone(), 0.1, 0.9).unwrap();
        for epoch in 0..epochs {
            if epoch < 5 {
                train_epoch_fixed(&mut net, &mut opt, &train, &attack, 64, epoch, seed).unwrap();
            } else {
                train_epoch_oracle(
                    &mut net, &mut opt, &train, &oracle_eps, &attack, 64, epoch, seed, true,
                );
            }
        }
        let nat = natural_accuracy(&net, &test).unwrap();
        let spec = AttackSpec::pgd_eval(10, 8.0 * E255, 3).unwrap();
        let rob = evaluate_robust_accuracy(&net, &test, &spec, rng::mix(seed, 5)).unwrap();
        println!("seed {seed}: oracle-radii nat={nat:.4} rob={rob:.4}");
    }
}
