//! l-infinity adversarial attacks: FGSM and PGD with random restarts.
//!
//! Attacks are pure functions of (model snapshot, sample, seed). Batched
//! entry points process samples independently, so results never depend on
//! batch composition; per-sample seeds are derived from stable sample
//! indices. Perturbed inputs always satisfy both the l-infinity constraint
//! and the `[0, 1]` pixel box.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::{argmax, cross_entropy_batch};
use crate::network::Network;
use crate::rng;
use crate::tensor::Tensor;

/// Attack family; FGSM is the single-step special case of PGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackFamily {
    Fgsm,
    Pgd,
}

/// Full description of one attack configuration.
///
/// `step_size` and `epsilon` are in `[0, 1]` pixel units; the CLI layer
/// converts from the `/255` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub family: AttackFamily,
    pub steps: usize,
    pub step_size: f64,
    pub epsilon: f64,
    pub restarts: usize,
    pub random_init: bool,
    pub targeted: bool,
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(Error::InvalidConfig("attack epsilon must be >= 0".into()));
        }
        if self.steps == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig(
                "attack steps and restarts must be >= 1".into(),
            ));
        }
        if self.step_size < 0.0 {
            return Err(Error::InvalidConfig("attack step size must be >= 0".into()));
        }
        if self.family == AttackFamily::Fgsm && (self.steps != 1 || self.step_size != self.epsilon)
        {
            return Err(Error::InvalidConfig(
                "FGSM requires steps == 1 and step_size == epsilon".into(),
            ));
        }
        Ok(())
    }

    /// Single signed-gradient step of size epsilon, no random start.
    pub fn fgsm(epsilon: f64) -> Result<Self> {
        let spec = Self {
            family: AttackFamily::Fgsm,
            steps: 1,
            step_size: epsilon,
            epsilon,
            restarts: 1,
            random_init: false,
            targeted: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// PGD with an explicit step size; random start inside the ball is on
    /// by default.
    pub fn pgd(steps: usize, step_size: f64, epsilon: f64) -> Result<Self> {
        let spec = Self {
            family: AttackFamily::Pgd,
            steps,
            step_size,
            epsilon,
            restarts: 1,
            random_init: true,
            targeted: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Evaluation-protocol PGD: step size fixed at `2.5 * epsilon / steps`.
    pub fn pgd_eval(steps: usize, epsilon: f64, restarts: usize) -> Result<Self> {
        let mut spec = Self::pgd(steps, 2.5 * epsilon / steps as f64, epsilon)?;
        spec.restarts = restarts;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_random_init(mut self, random_init: bool) -> Self {
        self.random_init = random_init;
        self
    }

    pub fn with_targeted(mut self, targeted: bool) -> Self {
        self.targeted = targeted;
        self
    }

    /// Same attack at a different radius; FGSM keeps `step_size == epsilon`.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        if self.family == AttackFamily::Fgsm {
            self.step_size = epsilon;
        }
        self
    }
}

/// Result of attacking one sample.
#[derive(Debug, Clone)]
pub struct AttackResult {
    /// Perturbed input, inside both the epsilon ball and `[0, 1]`.
    pub adversarial_input: Tensor,
    /// Untargeted: prediction differs from the true label.
    /// Targeted: prediction equals the target class.
    pub success: bool,
    /// Cross-entropy against the true label at the final iterate.
    pub final_loss: f64,
}

/// Batched attack outcome; index-aligned with the input batch.
#[derive(Debug, Clone)]
pub struct BatchAttackOutcome {
    pub adversarial: Tensor,
    pub success: Vec<bool>,
    pub final_loss: Vec<f64>,
}

struct RestartOutcome {
    adversarial: Tensor,
    success: Vec<bool>,
    final_loss: Vec<f64>,
}

/// Attack every sample of a batch independently.
///
/// `eps[i]` is the per-sample radius (uniform attacks splat
/// `spec.epsilon`), `seeds[i]` the per-sample random stream, and
/// `targets` must be given exactly when `spec.targeted` is set. Restarts
/// are merged per sample: the first success wins, otherwise the restart
/// with the highest untargeted final loss.
pub fn attack_batch(
    net: &Network,
    x: &Tensor,
    labels: &[usize],
    targets: Option<&[usize]>,
    eps: &[f64],
    spec: &AttackSpec,
    seeds: &[u64],
) -> Result<BatchAttackOutcome> {
    spec.validate()?;
    let n = x.batch_len();
    if labels.len() != n || eps.len() != n || seeds.len() != n {
        return Err(Error::ShapeMismatch {
            context: "attack_batch".into(),
            expected: format!("{} labels/eps/seeds", n),
            got: format!("{}/{}/{}", labels.len(), eps.len(), seeds.len()),
        });
    }
    if eps.iter().any(|&e| e < 0.0) {
        return Err(Error::InvalidConfig("per-sample epsilon must be >= 0".into()));
    }
    match (spec.targeted, targets) {
        (true, None) => {
            return Err(Error::InvalidConfig("targeted attack needs target classes".into()))
        }
        (true, Some(t)) => {
            if t.len() != n {
                return Err(Error::InvalidConfig("targets length mismatch".into()));
            }
            if t.iter().zip(labels).any(|(ti, yi)| ti == yi) {
                return Err(Error::InvalidConfig(
                    "targeted attack target equals true label".into(),
                ));
            }
        }
        (false, Some(_)) => {
            return Err(Error::InvalidConfig(
                "targets given for an untargeted attack".into(),
            ))
        }
        (false, None) => {}
    }

    let mut best: Option<RestartOutcome> = None;
    for restart in 0..spec.restarts {
        let outcome = run_restart(net, x, labels, targets, eps, spec, seeds, restart as u64)?;
        best = Some(match best {
            None => outcome,
            Some(mut acc) => {
                for i in 0..n {
                    let take = if acc.success[i] {
                        false
                    } else if outcome.success[i] {
                        true
                    } else {
                        outcome.final_loss[i] > acc.final_loss[i]
                    };
                    if take {
                        acc.success[i] = outcome.success[i];
                        acc.final_loss[i] = outcome.final_loss[i];
                        acc.adversarial
                            .sample_mut(i)
                            .copy_from_slice(outcome.adversarial.sample(i));
                    }
                }
                acc
            }
        });
    }
    let best = best.expect("restarts >= 1");
    Ok(BatchAttackOutcome {
        adversarial: best.adversarial,
        success: best.success,
        final_loss: best.final_loss,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_restart(
    net: &Network,
    x: &Tensor,
    labels: &[usize],
    targets: Option<&[usize]>,
    eps: &[f64],
    spec: &AttackSpec,
    seeds: &[u64],
    restart: u64,
) -> Result<RestartOutcome> {
    let n = x.batch_len();
    let dim = x.sample_len();
    let mut adv = x.clone();

    if spec.random_init {
        for i in 0..n {
            let mut rs: ChaCha8Rng = rng::chacha(rng::mix(seeds[i], restart));
            let orig = x.sample(i);
            let advi = adv.sample_mut(i);
            let e = eps[i];
            for c in 0..dim {
                let u = rng::uniform_pm1(&mut rs);
                advi[c] = (orig[c] + e * u).clamp(orig[c] - e, orig[c] + e).clamp(0.0, 1.0);
            }
        }
    }

    // Ascend the true-label loss, or descend the target-class loss.
    let objective = if spec.targeted { targets.expect("validated") } else { labels };
    let direction = if spec.targeted { -1.0 } else { 1.0 };
    for _ in 0..spec.steps {
        let (trace, logits) = net.forward_with_trace(&adv)?;
        if !logits.all_finite() {
            return Err(Error::NonFinite("attack forward logits".to_string()));
        }
        let (_, dlogits) = cross_entropy_batch(&logits, objective)?;
        let grad = net.backward_input(&trace, &dlogits);
        if !grad.all_finite() {
            return Err(Error::NonFinite("attack input gradient".to_string()));
        }
        for i in 0..n {
            let e = eps[i];
            let orig = x.sample(i);
            let gi = grad.sample(i);
            let advi = adv.sample_mut(i);
            for c in 0..dim {
                let step = direction * spec.step_size * sign(gi[c]);
                advi[c] = (advi[c] + step).clamp(orig[c] - e, orig[c] + e).clamp(0.0, 1.0);
            }
        }
    }

    let logits = net.forward(&adv)?;
    if !logits.all_finite() {
        return Err(Error::NonFinite("attack final logits".to_string()));
    }
    let (losses, _) = cross_entropy_batch(&logits, labels)?;
    let mut success = Vec::with_capacity(n);
    for i in 0..n {
        let pred = argmax(logits.sample(i));
        success.push(match targets {
            Some(t) if spec.targeted => pred == t[i],
            _ => pred != labels[i],
        });
        debug_assert!(
            sample_linf(adv.sample(i), x.sample(i)) <= eps[i] + 1e-12,
            "attack left the epsilon ball"
        );
        debug_assert!(
            adv.sample(i).iter().all(|&v| (0.0..=1.0).contains(&v)),
            "attack left the pixel box"
        );
    }
    Ok(RestartOutcome { adversarial: adv, success, final_loss: losses })
}

fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn sample_linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max)
}

/// Attack a single (unbatched) sample.
pub fn pgd_attack(
    net: &Network,
    x: &Tensor,
    label: usize,
    target: Option<usize>,
    spec: &AttackSpec,
    seed: u64,
) -> Result<AttackResult> {
    let batch = Tensor::stack(&[x])?;
    let outcome = attack_batch(
        net,
        &batch,
        &[label],
        target.map(|t| vec![t]).as_deref(),
        &[spec.epsilon],
        spec,
        &[seed],
    )?;
    Ok(AttackResult {
        adversarial_input: outcome.adversarial.unstack(0),
        success: outcome.success[0],
        final_loss: outcome.final_loss[0],
    })
}

/// Uniform draw over the classes other than `y`.
pub fn sample_random_target(y: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    if n_classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "targeted attacks need >= 2 classes, got {}",
            n_classes
        )));
    }
    if y >= n_classes {
        return Err(Error::InvalidConfig(format!(
            "label {} out of range for {} classes",
            y, n_classes
        )));
    }
    use rand::Rng;
    let t = rng.random_range(0..n_classes - 1);
    Ok(if t >= y { t + 1 } else { t })
}

/// Attack a batch, sampling random target classes from the per-sample seeds
/// when the spec is targeted.
pub fn attack_batch_auto_targets(
    net: &Network,
    x: &Tensor,
    labels: &[usize],
    eps: &[f64],
    spec: &AttackSpec,
    seeds: &[u64],
) -> Result<BatchAttackOutcome> {
    let targets = if spec.targeted {
        let mut ts = Vec::with_capacity(labels.len());
        for (pos, &s) in seeds.iter().enumerate() {
            let mut trng = rng::chacha(rng::mix(s, 0x7a67));
            ts.push(sample_random_target(labels[pos], net.n_classes(), &mut trng)?);
        }
        Some(ts)
    } else {
        None
    };
    attack_batch(net, x, labels, targets.as_deref(), eps, spec, seeds)
}

/// Fraction of samples that are classified correctly on the clean input and
/// keep that prediction under the attack (all restarts fail). A sample that
/// is already misclassified clean counts as non-robust.
pub fn evaluate_robust_accuracy(
    net: &Network,
    dataset: &LabeledDataset,
    spec: &AttackSpec,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    if dataset.len() == 0 {
        return Err(Error::InvalidConfig("robust accuracy over an empty dataset".into()));
    }
    let mut robust = 0usize;
    for chunk in dataset.index_chunks(256) {
        let (x, labels, indices) = dataset.batch(&chunk)?;
        let clean_logits = net.forward(&x)?;
        let eps = vec![spec.epsilon; labels.len()];
        let seeds: Vec<u64> = indices.iter().map(|&i| rng::mix(seed, i as u64)).collect();
        let outcome = attack_batch_auto_targets(net, &x, &labels, &eps, spec, &seeds)?;
        for (pos, &label) in labels.iter().enumerate() {
            let clean_ok = argmax(clean_logits.sample(pos)) == label;
            if clean_ok && !outcome.success[pos] {
                robust += 1;
            }
        }
    }
    Ok(robust as f64 / dataset.len() as f64)
}
