//! Instance-adaptive adversarial training.
//!
//! Every training sample carries its own perturbation radius in an
//! [`EpsilonMemory`]. After a warmup period of uniform-radius adversarial
//! training, each epoch re-estimates the radius per sample with a discretized
//! up/down search: try `prev + gamma`; if the selection attack fails to flip
//! the label keep that, otherwise try `prev`, otherwise fall back to
//! `prev - gamma` without running a third attack. The accepted candidate is
//! exponentially smoothed into the memory with factor `beta`, so the radius
//! drifts by at most `beta * gamma` per epoch.
//!
//! The training step itself splits each batch by the clean prediction of the
//! current model: correctly classified samples contribute their adversarial
//! loss, misclassified ones their clean loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::attack::{attack_batch_auto_targets, AttackSpec};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::{argmax, cross_entropy_batch};
use crate::network::Network;
use crate::optim::SgdOptimizer;
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

/// Per-sample radius table, addressed by stable sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonMemory {
    current: Vec<f64>,
    history: Vec<Vec<f64>>,
    eps_min: f64,
    eps_max: f64,
}

impl EpsilonMemory {
    pub fn new(n: usize, init: f64, eps_min: f64, eps_max: f64) -> Result<Self> {
        if !(0.0 <= eps_min && eps_min <= eps_max) {
            return Err(Error::InvalidConfig("need 0 <= eps_min <= eps_max".into()));
        }
        if !(eps_min..=eps_max).contains(&init) {
            return Err(Error::InvalidConfig(format!(
                "memory init {} outside [{}, {}]",
                init, eps_min, eps_max
            )));
        }
        Ok(Self { current: vec![init; n], history: Vec::new(), eps_min, eps_max })
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.eps_min, self.eps_max)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.current[index]
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    /// Store a new radius; values are clamped into the bounds.
    pub fn update(&mut self, index: usize, value: f64) {
        self.current[index] = value.clamp(self.eps_min, self.eps_max);
    }

    /// Record the current state as one epoch snapshot.
    pub fn snapshot(&mut self) {
        self.history.push(self.current.clone());
    }

    /// Per-epoch snapshots, oldest first.
    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    pub fn mean(&self) -> f64 {
        self.current.iter().sum::<f64>() / self.current.len().max(1) as f64
    }
}

/// Configuration of the adaptive training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IaatConfig {
    /// Total training epochs.
    pub n_iter: usize,
    /// Warmup epochs at uniform radius `eps_w` before adaptation starts.
    pub n_warm: usize,
    /// Warmup radius; also the memory initialization.
    pub eps_w: f64,
    /// Discretization step of the radius search.
    pub gamma: f64,
    /// Exponential smoothing factor in (0, 1].
    pub beta: f64,
    /// Attack used to probe candidate radii; may be weaker than the
    /// training attack.
    pub selection_attack: AttackSpec,
    /// Attack used to craft the training examples; its epsilon is
    /// overridden per sample.
    pub training_attack: AttackSpec,
    pub eps_min: f64,
    pub eps_max: f64,
}

impl IaatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_warm >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "warmup ({}) must be shorter than the run ({})",
                self.n_warm, self.n_iter
            )));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidConfig("gamma must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidConfig("beta must be in (0, 1]".into()));
        }
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps_max) {
            return Err(Error::InvalidConfig("need 0 <= eps_min <= eps_max".into()));
        }
        if !(self.eps_min..=self.eps_max).contains(&self.eps_w) {
            return Err(Error::InvalidConfig("eps_w outside [eps_min, eps_max]".into()));
        }
        self.selection_attack.validate()?;
        self.training_attack.validate()?;
        Ok(())
    }

    /// Fresh memory sized to a dataset, initialized at the warmup radius.
    pub fn new_memory(&self, n: usize) -> Result<EpsilonMemory> {
        EpsilonMemory::new(n, self.eps_w, self.eps_min, self.eps_max)
    }
}

/// One radius-selection step for a single sample; `prev` must lie inside
/// the configured bounds. See [`select_epsilon_batch`].
pub fn select_epsilon(
    net: &Network,
    x: &Tensor,
    label: usize,
    prev: f64,
    cfg: &IaatConfig,
    seed: u64,
) -> Result<f64> {
    let batch = Tensor::stack(&[x])?;
    Ok(select_epsilon_batch(net, &batch, &[label], &[prev], cfg, &[seed])?[0])
}

/// Radius selection for a whole batch; samples are handled independently,
/// so results do not depend on batch composition.
pub fn select_epsilon_batch(
    net: &Network,
    x: &Tensor,
    labels: &[usize],
    prev: &[f64],
    cfg: &IaatConfig,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = x.batch_len();
    if labels.len() != n || prev.len() != n || seeds.len() != n {
        return Err(Error::ShapeMismatch {
            context: "select_epsilon_batch".into(),
            expected: format!("{} labels/prev/seeds", n),
            got: format!("{}/{}/{}", labels.len(), prev.len(), seeds.len()),
        });
    }
    for &p in prev {
        if !(cfg.eps_min..=cfg.eps_max).contains(&p) {
            return Err(Error::InvalidConfig(format!(
                "previous radius {} outside [{}, {}]",
                p, cfg.eps_min, cfg.eps_max
            )));
        }
    }

    // Stage one: probe prev + gamma on every sample.
    let up: Vec<f64> = prev.iter().map(|&p| (p + cfg.gamma).max(0.0)).collect();
    let seeds_up: Vec<u64> = seeds.iter().map(|&s| rng::mix(s, 1)).collect();
    let up_out = attack_batch_auto_targets(net, x, labels, &up, &cfg.selection_attack, &seeds_up)?;

    // Stage two: probe prev only where the raised radius already flipped.
    let retry: Vec<usize> = (0..n).filter(|&i| up_out.success[i]).collect();
    let mut hold_success = vec![false; n];
    if !retry.is_empty() {
        let sub_refs: Vec<Tensor> = retry.iter().map(|&i| x.unstack(i)).collect();
        let sub_x = Tensor::stack(&sub_refs.iter().collect::<Vec<_>>())?;
        let sub_labels: Vec<usize> = retry.iter().map(|&i| labels[i]).collect();
        let sub_eps: Vec<f64> = retry.iter().map(|&i| prev[i].max(0.0)).collect();
        let sub_seeds: Vec<u64> = retry.iter().map(|&i| rng::mix(seeds[i], 2)).collect();
        let hold_out = attack_batch_auto_targets(
            net,
            &sub_x,
            &sub_labels,
            &sub_eps,
            &cfg.selection_attack,
            &sub_seeds,
        )?;
        for (pos, &i) in retry.iter().enumerate() {
            hold_success[i] = hold_out.success[pos];
        }
    }

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let raw = if !up_out.success[i] {
            up[i]
        } else if !hold_success[i] {
            prev[i]
        } else {
            // The downward candidate is accepted without an attack.
            (prev[i] - cfg.gamma).max(cfg.eps_min)
        };
        let smoothed = (1.0 - cfg.beta) * prev[i] + cfg.beta * raw;
        let clamped = smoothed.clamp(cfg.eps_min, cfg.eps_max);
        debug_assert!(
            libm::fabs(clamped - prev[i]) <= cfg.beta * cfg.gamma + 1e-12,
            "radius drifted more than beta*gamma in one step"
        );
        out.push(clamped);
    }
    Ok(out)
}

/// Per-epoch training statistics.
#[derive(Debug, Clone)]
pub struct EpochStats {
    /// Mean training loss over all batches.
    pub mean_loss: f64,
    /// Clean accuracy of the evolving model over the epoch (from the
    /// batch-split forward passes).
    pub clean_accuracy: f64,
    /// Radius applied to each sample this epoch, by sample index.
    pub applied_eps: Vec<f64>,
}

fn shuffled_indices(n: usize, run_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::chacha(rng::epoch_seed(run_seed, Stream::Shuffle, epoch));
    rng::shuffle(&mut rng, &mut order);
    order
}

/// One epoch of instance-adaptive adversarial training.
///
/// During warmup (`epoch < n_warm`) every sample is attacked at `eps_w` and
/// the memory is left untouched; afterwards the per-sample radius is
/// re-selected and written back. Returns the epoch statistics.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch_iaat(
    net: &mut Network,
    opt: &mut SgdOptimizer,
    ds: &LabeledDataset,
    mem: &mut EpsilonMemory,
    cfg: &IaatConfig,
    batch_size: usize,
    epoch: usize,
    run_seed: u64,
) -> Result<EpochStats> {
    cfg.validate()?;
    if mem.len() != ds.len() {
        return Err(Error::InvalidConfig(format!(
            "epsilon memory sized {} but dataset has {} samples",
            mem.len(),
            ds.len()
        )));
    }
    let warmup = epoch < cfg.n_warm;
    let order = shuffled_indices(ds.len(), run_seed, epoch);
    let mut applied = vec![0.0; ds.len()];
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in order.chunks(batch_size.max(1)) {
        let (x, labels, indices) = ds.batch(chunk)?;
        let eps: Vec<f64> = if warmup {
            vec![cfg.eps_w; indices.len()]
        } else {
            let prev: Vec<f64> = indices.iter().map(|&i| mem.get(i)).collect();
            let seeds: Vec<u64> = indices
                .iter()
                .map(|&i| rng::sample_seed(run_seed, Stream::SelectAttack, epoch, i))
                .collect();
            let selected = select_epsilon_batch(net, &x, &labels, &prev, cfg, &seeds)?;
            for (pos, &i) in indices.iter().enumerate() {
                mem.update(i, selected[pos]);
            }
            selected
        };
        for (pos, &i) in indices.iter().enumerate() {
            applied[i] = eps[pos];
        }

        let seeds: Vec<u64> = indices
            .iter()
            .map(|&i| rng::sample_seed(run_seed, Stream::TrainAttack, epoch, i))
            .collect();
        let adv =
            attack_batch_auto_targets(net, &x, &labels, &eps, &cfg.training_attack, &seeds)?;

        // Split by the clean prediction of the current model: correctly
        // classified samples train on their adversarial example,
        // misclassified ones on the clean input.
        let clean_logits = net.forward(&x)?;
        let mut mixed = x.clone();
        for (pos, &label) in labels.iter().enumerate() {
            let clean_ok = argmax(clean_logits.sample(pos)) == label;
            if clean_ok {
                mixed
                    .sample_mut(pos)
                    .copy_from_slice(adv.adversarial.sample(pos));
                correct += 1;
            }
        }
        loss_sum += sgd_on_batch(net, opt, &mixed, &labels, epoch)? * labels.len() as f64;
    }
    Ok(EpochStats {
        mean_loss: loss_sum / ds.len() as f64,
        clean_accuracy: correct as f64 / ds.len() as f64,
        applied_eps: applied,
    })
}

/// One epoch of uniform-radius adversarial training (no batch split); the
/// radius comes from `attack.epsilon`. With `epsilon == 0` this reduces to
/// clean training exactly.
pub fn train_epoch_fixed(
    net: &mut Network,
    opt: &mut SgdOptimizer,
    ds: &LabeledDataset,
    attack: &AttackSpec,
    batch_size: usize,
    epoch: usize,
    run_seed: u64,
) -> Result<EpochStats> {
    attack.validate()?;
    let order = shuffled_indices(ds.len(), run_seed, epoch);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in order.chunks(batch_size.max(1)) {
        let (x, labels, indices) = ds.batch(chunk)?;
        let clean_logits = net.forward(&x)?;
        for (pos, &label) in labels.iter().enumerate() {
            if argmax(clean_logits.sample(pos)) == label {
                correct += 1;
            }
        }
        let train_x = if attack.epsilon == 0.0 {
            x.clone()
        } else {
            let eps = vec![attack.epsilon; indices.len()];
            let seeds: Vec<u64> = indices
                .iter()
                .map(|&i| rng::sample_seed(run_seed, Stream::TrainAttack, epoch, i))
                .collect();
            attack_batch_auto_targets(net, &x, &labels, &eps, attack, &seeds)?.adversarial
        };
        loss_sum += sgd_on_batch(net, opt, &train_x, &labels, epoch)? * labels.len() as f64;
    }
    Ok(EpochStats {
        mean_loss: loss_sum / ds.len() as f64,
        clean_accuracy: correct as f64 / ds.len() as f64,
        applied_eps: vec![attack.epsilon; ds.len()],
    })
}

fn sgd_on_batch(
    net: &mut Network,
    opt: &mut SgdOptimizer,
    x: &Tensor,
    labels: &[usize],
    epoch: usize,
) -> Result<f64> {
    let (trace, logits) = net.forward_with_trace(x)?;
    if !logits.all_finite() {
        return Err(Error::NonFinite("training logits".into()));
    }
    let (losses, mut dlogits) = cross_entropy_batch(&logits, labels)?;
    let scale = 1.0 / labels.len() as f64;
    for g in dlogits.data_mut() {
        *g *= scale;
    }
    let (grads, _) = net.backward(&trace, &dlogits);
    opt.step(net, &grads, epoch)?;
    Ok(losses.iter().sum::<f64>() * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_linear_oracle;

    const E255: f64 = 1.0 / 255.0;

    fn test_cfg() -> IaatConfig {
        IaatConfig {
            n_iter: 40,
            n_warm: 2,
            eps_w: 8.0 * E255,
            gamma: 1.9 * E255,
            beta: 0.1,
            selection_attack: AttackSpec::pgd(10, 0.02, 8.0 * E255).unwrap(),
            training_attack: AttackSpec::pgd(10, 2.0 * E255, 8.0 * E255).unwrap(),
            eps_min: 0.0,
            eps_max: 64.0 * E255,
        }
    }

    /// Sample at exact l-inf margin m (positive side) of the fixed
    /// hyperplane 0.6x - 0.4y - 0.1 = 0, together with that model.
    fn margin_probe(m: f64) -> (Network, Tensor) {
        let net = Network::linear_two_class(&[0.6, -0.4], -0.1).unwrap();
        let x = Tensor::from_slice(&[0.5 + m, 0.5 - m]);
        (net, x)
    }

    #[test]
    fn branch_up_arithmetic() {
        // Robust at prev + gamma: raw = 9.9/255, smoothed = 8.19/255.
        let cfg = test_cfg();
        let (net, x) = margin_probe(20.0 * E255);
        let got = select_epsilon(&net, &x, 1, 8.0 * E255, &cfg, 3).unwrap();
        assert!((got - 8.19 * E255).abs() < 1e-12, "{got}");
    }

    #[test]
    fn branch_hold_arithmetic() {
        // Flips at prev + gamma but robust at prev: raw = prev.
        let cfg = test_cfg();
        let (net, x) = margin_probe(9.0 * E255);
        let got = select_epsilon(&net, &x, 1, 8.0 * E255, &cfg, 3).unwrap();
        assert!((got - 8.0 * E255).abs() < 1e-12, "{got}");
    }

    #[test]
    fn branch_down_arithmetic() {
        // Flips at both probes: raw = 6.1/255, smoothed = 7.81/255.
        let cfg = test_cfg();
        let (net, x) = margin_probe(4.0 * E255);
        let got = select_epsilon(&net, &x, 1, 8.0 * E255, &cfg, 3).unwrap();
        assert!((got - 7.81 * E255).abs() < 1e-12, "{got}");
    }

    #[test]
    fn beta_one_disables_smoothing() {
        let mut cfg = test_cfg();
        cfg.beta = 1.0;
        let (net, x) = margin_probe(20.0 * E255);
        let got = select_epsilon(&net, &x, 1, 8.0 * E255, &cfg, 3).unwrap();
        assert!((got - 9.9 * E255).abs() < 1e-12, "{got}");
        let (net, x) = margin_probe(4.0 * E255);
        let got = select_epsilon(&net, &x, 1, 8.0 * E255, &cfg, 3).unwrap();
        assert!((got - 6.1 * E255).abs() < 1e-12, "{got}");
    }

    #[test]
    fn iterated_selection_converges_to_margin() {
        let cfg = test_cfg();
        let m = 15.0 * E255;
        let (net, x) = margin_probe(m);
        let mut eps = cfg.eps_w;
        let mut trail = Vec::new();
        for it in 0..150 {
            eps = select_epsilon(&net, &x, 1, eps, &cfg, it).unwrap();
            trail.push(eps);
        }
        assert!((eps - m).abs() <= cfg.gamma + 1e-12, "converged to {eps}, margin {m}");
        // Oscillation amplitude after convergence stays within beta*gamma.
        let tail = &trail[120..];
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo <= cfg.beta * cfg.gamma + 1e-12, "oscillation {}", hi - lo);
    }

    #[test]
    fn floor_clamps_downward_candidate() {
        let mut cfg = test_cfg();
        cfg.eps_min = 4.0 * E255;
        cfg.beta = 1.0;
        // Margin far below prev: both probes flip, raw = prev - gamma, but
        // the floor holds it at eps_min.
        let (net, x) = margin_probe(0.5 * E255);
        let got = select_epsilon(&net, &x, 1, 5.0 * E255, &cfg, 1).unwrap();
        assert!((got - 4.0 * E255).abs() < 1e-12, "{got}");
    }

    #[test]
    fn memory_bounds_and_mismatch_errors() {
        let cfg = test_cfg();
        let mut mem = cfg.new_memory(4).unwrap();
        mem.update(0, 100.0);
        assert!(mem.get(0) <= cfg.eps_max);
        mem.update(1, -3.0);
        assert!(mem.get(1) >= cfg.eps_min);

        let (ds, _) = make_linear_oracle(8, 2, 1, 0.05, 0.1).unwrap();
        let mut net = Network::mlp(2, &[4], 2, 1).unwrap();
        let mut opt = SgdOptimizer::plain(0.1);
        let err = train_epoch_iaat(&mut net, &mut opt, &ds, &mut mem, &cfg, 4, 0, 7).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn warmup_applies_uniform_radius_and_freezes_memory() {
        let cfg = test_cfg();
        let (ds, _) = make_linear_oracle(16, 2, 2, 0.02, 0.1).unwrap();
        let mut net = Network::mlp(2, &[6], 2, 5).unwrap();
        let mut opt = SgdOptimizer::plain(0.05);
        let mut mem = cfg.new_memory(ds.len()).unwrap();
        for epoch in 0..cfg.n_warm {
            let stats =
                train_epoch_iaat(&mut net, &mut opt, &ds, &mut mem, &cfg, 8, epoch, 3).unwrap();
            assert!(stats.applied_eps.iter().all(|&e| e == cfg.eps_w));
            assert!(mem.current().iter().all(|&e| e == cfg.eps_w));
        }
    }

    #[test]
    fn fully_misclassified_batch_trains_clean() {
        // All labels inverted relative to the model's predictions: S- is the
        // whole batch and the step must equal a plain clean training step.
        let cfg = test_cfg();
        let (ds0, _) = make_linear_oracle(12, 2, 3, 0.05, 0.15).unwrap();
        let probe = Network::mlp(2, &[5], 2, 11).unwrap();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..ds0.len() {
            let (x, _) = ds0.sample(i);
            let pred = argmax(
                probe
                    .forward(&Tensor::stack(&[x]).unwrap())
                    .unwrap()
                    .sample(0),
            );
            samples.push(x.clone());
            labels.push(1 - pred);
        }
        let ds = LabeledDataset::new("inverted", 2, samples, labels.clone()).unwrap();

        let mut net_a = probe.clone();
        let mut opt_a = SgdOptimizer::plain(0.05);
        let mut mem = cfg.new_memory(ds.len()).unwrap();
        let epoch = cfg.n_warm; // adaptation active
        train_epoch_iaat(&mut net_a, &mut opt_a, &ds, &mut mem, &cfg, ds.len(), epoch, 9).unwrap();

        let mut net_b = probe.clone();
        let mut opt_b = SgdOptimizer::plain(0.05);
        let order = shuffled_indices(ds.len(), 9, epoch);
        let (x, y, _) = ds.batch(&order).unwrap();
        sgd_on_batch(&mut net_b, &mut opt_b, &x, &y, epoch).unwrap();

        assert_eq!(net_a.params_flat(), net_b.params_flat());
    }

    #[test]
    fn fixed_epoch_at_zero_eps_is_clean_training() {
        let (ds, _) = make_linear_oracle(16, 2, 4, 0.05, 0.15).unwrap();
        let base = Network::mlp(2, &[6], 2, 8).unwrap();

        let mut net_a = base.clone();
        let mut opt_a = SgdOptimizer::plain(0.1);
        let attack = AttackSpec::pgd(10, 2.0 * E255, 0.0).unwrap();
        train_epoch_fixed(&mut net_a, &mut opt_a, &ds, &attack, 8, 0, 13).unwrap();

        let mut net_b = base.clone();
        let mut opt_b = SgdOptimizer::plain(0.1);
        let order = shuffled_indices(ds.len(), 13, 0);
        for chunk in order.chunks(8) {
            let (x, y, _) = ds.batch(chunk).unwrap();
            sgd_on_batch(&mut net_b, &mut opt_b, &x, &y, 0).unwrap();
        }
        assert_eq!(net_a.params_flat(), net_b.params_flat());
    }

    #[test]
    fn fixed_epoch_matches_hand_stepped_composition() {
        let (ds, _) = make_linear_oracle(10, 2, 5, 0.02, 0.1).unwrap();
        let base = Network::mlp(2, &[4], 2, 20).unwrap();
        let attack = AttackSpec::pgd(5, 2.0 * E255, 8.0 * E255).unwrap();
        let run_seed = 31;

        let mut net_a = base.clone();
        let mut opt_a = SgdOptimizer::plain(0.1);
        train_epoch_fixed(&mut net_a, &mut opt_a, &ds, &attack, ds.len(), 0, run_seed).unwrap();

        // Hand-rolled: same shuffle, attack, then one SGD step.
        let mut net_b = base.clone();
        let mut opt_b = SgdOptimizer::plain(0.1);
        let order = shuffled_indices(ds.len(), run_seed, 0);
        let (x, y, idx) = ds.batch(&order).unwrap();
        let eps = vec![attack.epsilon; idx.len()];
        let seeds: Vec<u64> = idx
            .iter()
            .map(|&i| rng::sample_seed(run_seed, Stream::TrainAttack, 0, i))
            .collect();
        let adv = attack_batch_auto_targets(&net_b, &x, &y, &eps, &attack, &seeds).unwrap();
        sgd_on_batch(&mut net_b, &mut opt_b, &adv.adversarial, &y, 0).unwrap();

        assert_eq!(net_a.params_flat(), net_b.params_flat());
    }

    #[test]
    fn memory_mean_rises_past_warmup_on_separable_data() {
        // Wide-margin data: the model becomes robust at the warmup radius,
        // so radii keep growing after warmup.
        let mut cfg = test_cfg();
        cfg.n_warm = 3;
        cfg.n_iter = 25;
        let (ds, _) = make_linear_oracle(48, 2, 6, 0.12, 0.2).unwrap();
        let mut net = Network::mlp(2, &[8], 2, 2).unwrap();
        let mut opt = SgdOptimizer::plain(0.2);
        let mut mem = cfg.new_memory(ds.len()).unwrap();
        for epoch in 0..cfg.n_iter {
            train_epoch_iaat(&mut net, &mut opt, &ds, &mut mem, &cfg, 16, epoch, 17).unwrap();
            mem.snapshot();
        }
        assert!(
            mem.mean() > cfg.eps_w,
            "mean radius {} did not rise above eps_w {}",
            mem.mean(),
            cfg.eps_w
        );
        // Drift per epoch never exceeded beta*gamma.
        for pair in mem.history().windows(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                assert!((a - b).abs() <= cfg.beta * cfg.gamma + 1e-12);
            }
        }
    }

    #[test]
    fn determinism_across_reruns() {
        let cfg = test_cfg();
        let (ds, _) = make_linear_oracle(20, 2, 7, 0.02, 0.15).unwrap();
        let mut runs = Vec::new();
        for _ in 0..2 {
            let mut net = Network::mlp(2, &[6], 2, 77).unwrap();
            let mut opt = SgdOptimizer::plain(0.1);
            let mut mem = cfg.new_memory(ds.len()).unwrap();
            for epoch in 0..6 {
                train_epoch_iaat(&mut net, &mut opt, &ds, &mut mem, &cfg, 8, epoch, 5).unwrap();
            }
            runs.push((net.params_flat(), mem.current().to_vec()));
        }
        assert_eq!(runs[0].0, runs[1].0);
        assert_eq!(runs[0].1, runs[1].1);
    }
}
