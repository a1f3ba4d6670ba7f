//! Property tests over the crate's structural invariants.

use iaat_core::adaptive::EpsilonMemory;
use iaat_core::attack::{pgd_attack, AttackSpec};
use iaat_core::loss::softmax;
use iaat_core::network::Network;
use iaat_core::Tensor;
use proptest::prelude::*;

proptest! {
    #[test]
    fn softmax_is_a_probability_vector(
        logits in prop::collection::vec(-50.0f64..50.0, 2..8)
    ) {
        let p = softmax(&logits);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn memory_updates_stay_inside_bounds(
        init in 0.0f64..0.25,
        values in prop::collection::vec(-1.0f64..2.0, 1..40)
    ) {
        let mut mem = EpsilonMemory::new(values.len(), init.min(0.25), 0.0, 0.25).unwrap();
        for (i, v) in values.iter().enumerate() {
            mem.update(i, *v);
            prop_assert!((0.0..=0.25).contains(&mem.get(i)));
        }
    }

    #[test]
    fn attacks_respect_ball_and_box(
        seed in 0u64..500,
        eps in 0.0f64..0.3,
        steps in 1usize..6,
        coords in prop::collection::vec(0.0f64..1.0, 4)
    ) {
        let net = Network::mlp(4, &[5], 2, 77).unwrap();
        let x = Tensor::from_slice(&coords);
        let spec = AttackSpec::pgd(steps, eps / steps as f64 + 0.01, eps)
            .unwrap()
            .with_restarts(2);
        let res = pgd_attack(&net, &x, (seed % 2) as usize, None, &spec, seed).unwrap();
        prop_assert!(res.adversarial_input.linf_distance(&x) <= eps + 1e-12);
        prop_assert!(res
            .adversarial_input
            .data()
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn stack_unstack_round_trips(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..6)
    ) {
        let tensors: Vec<Tensor> = rows.iter().map(|r| Tensor::from_slice(r)).collect();
        let refs: Vec<&Tensor> = tensors.iter().collect();
        let batch = Tensor::stack(&refs).unwrap();
        for (i, t) in tensors.iter().enumerate() {
            let sample = batch.unstack(i);
            prop_assert_eq!(sample.data(), t.data());
        }
    }
}
