//! SGD with momentum, weight decay and a step-decay learning-rate schedule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::Network;

/// Optimizer configuration plus its momentum state.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdOptimizer {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Epoch indices at which the learning rate is multiplied by
    /// `decay_factor`; the decayed rate applies from that epoch onward.
    pub decay_steps: Vec<usize>,
    pub decay_factor: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl SgdOptimizer {
    pub fn new(
        learning_rate: f64,
        weight_decay: f64,
        decay_steps: Vec<usize>,
        decay_factor: f64,
        momentum: f64,
    ) -> Result<Self> {
        if learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if weight_decay < 0.0 || momentum < 0.0 {
            return Err(Error::InvalidConfig(
                "weight_decay and momentum must be nonnegative".into(),
            ));
        }
        if !(decay_factor > 0.0 && decay_factor <= 1.0) {
            return Err(Error::InvalidConfig("decay_factor must be in (0, 1]".into()));
        }
        Ok(Self {
            learning_rate,
            weight_decay,
            decay_steps,
            decay_factor,
            momentum,
            velocity: Vec::new(),
        })
    }

    /// Plain SGD at a fixed rate.
    pub fn plain(learning_rate: f64) -> Self {
        Self::new(learning_rate, 0.0, Vec::new(), 1.0, 0.0).expect("valid")
    }

    /// Effective learning rate at an epoch: base times
    /// `decay_factor^(number of decay steps <= epoch)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let hits = self.decay_steps.iter().filter(|&&s| s <= epoch).count();
        let mut lr = self.learning_rate;
        for _ in 0..hits {
            lr *= self.decay_factor;
        }
        lr
    }

    /// One update: `v <- momentum*v + (g + weight_decay*theta)`,
    /// `theta <- theta - lr(epoch) * v`.
    pub fn step(&mut self, net: &mut Network, grads: &[f64], epoch: usize) -> Result<()> {
        let mut params = net.params_flat();
        if grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                context: "sgd step".into(),
                expected: format!("{} gradients", params.len()),
                got: format!("{}", grads.len()),
            });
        }
        if self.velocity.is_empty() {
            self.velocity = vec![0.0; params.len()];
        } else if self.velocity.len() != params.len() {
            return Err(Error::ShapeMismatch {
                context: "sgd velocity".into(),
                expected: format!("{} entries", params.len()),
                got: format!("{}", self.velocity.len()),
            });
        }
        let lr = self.lr_at(epoch);
        for ((theta, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            let update = g + self.weight_decay * *theta;
            *v = self.momentum * *v + update;
            *theta -= lr * *v;
        }
        net.set_params_flat(&params)
    }

    /// Drop accumulated momentum (fresh run on the same config).
    pub fn reset(&mut self) {
        self.velocity.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;

    #[test]
    fn vanilla_step_is_theta_minus_lr_g() {
        let mut net = Network::mlp(2, &[], 2, 4).unwrap();
        let before = net.params_flat();
        let grads = vec![1.0; before.len()];
        let mut opt = SgdOptimizer::plain(0.1);
        opt.step(&mut net, &grads, 0).unwrap();
        for (b, a) in before.iter().zip(net.params_flat()) {
            assert!((a - (b - 0.1)).abs() < 1e-15);
        }
    }

    #[test]
    fn step_decay_schedule() {
        let opt = SgdOptimizer::new(0.1, 0.0, vec![80, 140, 170], 0.1, 0.9).unwrap();
        assert!((opt.lr_at(0) - 0.1).abs() < 1e-15);
        assert!((opt.lr_at(79) - 0.1).abs() < 1e-15);
        assert!((opt.lr_at(80) - 0.01).abs() < 1e-15);
        assert!((opt.lr_at(150) - 0.001).abs() < 1e-15);
        assert!((opt.lr_at(170) - 0.0001).abs() < 1e-16);
    }

    #[test]
    fn momentum_doubles_up_on_repeated_gradient() {
        // Two identical steps of gradient g: the second update has
        // magnitude (1 + momentum) * lr * |g|.
        let mut net = Network::mlp(2, &[], 2, 4).unwrap();
        let g = vec![0.5; net.param_count()];
        let mut opt = SgdOptimizer::new(0.1, 0.0, vec![], 1.0, 0.9).unwrap();
        let p0 = net.params_flat();
        opt.step(&mut net, &g, 0).unwrap();
        let p1 = net.params_flat();
        opt.step(&mut net, &g, 0).unwrap();
        let p2 = net.params_flat();
        for i in 0..p0.len() {
            let first = p0[i] - p1[i];
            let second = p1[i] - p2[i];
            assert!((first - 0.1 * 0.5).abs() < 1e-15);
            assert!((second - 1.9 * 0.1 * 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut net = Network::mlp(2, &[], 2, 4).unwrap();
        let zeros = vec![0.0; net.param_count()];
        let mut with_decay = SgdOptimizer::new(0.1, 0.01, vec![], 1.0, 0.0).unwrap();
        let before: f64 = net.params_flat().iter().map(|p| p * p).sum();
        with_decay.step(&mut net, &zeros, 0).unwrap();
        let after: f64 = net.params_flat().iter().map(|p| p * p).sum();
        assert!(after < before);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SgdOptimizer::new(0.0, 0.0, vec![], 1.0, 0.9).is_err());
        assert!(SgdOptimizer::new(0.1, -0.1, vec![], 1.0, 0.9).is_err());
        assert!(SgdOptimizer::new(0.1, 0.0, vec![], 0.0, 0.9).is_err());
        assert!(SgdOptimizer::new(0.1, 0.0, vec![], 1.5, 0.9).is_err());
    }
}
