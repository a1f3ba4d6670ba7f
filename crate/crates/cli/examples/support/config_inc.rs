// Shared experiment-config builder for the calibrate/diagnose examples
// (pulled in via include!).

use iaat_cli::config::{
    AttackConfig, DatasetConfig, EvalConfig, IaatParams, ModelConfig, OptimizerConfig,
    ProtocolConfig,
};

pub struct Knobs {
    pub noise: f64,
    pub overlap: f64,
    pub epochs: usize,
    pub eps_max: f64,
    pub sel_steps: usize,
    pub sel_alpha: f64,
    pub sel_restarts: usize,
    pub beta: f64,
    pub width: usize,
    pub n_train: usize,
}

pub fn base_config(k: &Knobs, seed: u64) -> ExperimentConfig {
    let Knobs { noise, overlap, epochs, eps_max, sel_steps, sel_alpha, sel_restarts, beta, width, n_train } = *k;
    ExperimentConfig {
        name: format!(
            "cal-n{noise}-o{overlap}-e{epochs}-m{eps_max}-s{sel_steps}-a{sel_alpha}-r{sel_restarts}-b{beta}-w{width}-t{n_train}"
        ),
        dataset: DatasetConfig::Moons {
            n_train,
            n_test: 1024,
            noise,
            overlap,
            seed: 1,
        },
        model: ModelConfig::Mlp { hidden: vec![width, width] },
        mode: TrainMode::Iaat,
        epochs,
        batch_size: 64,
        optimizer: OptimizerConfig {
            learning_rate: 0.05,
            weight_decay: 0.0002,
            momentum: 0.9,
            decay_steps: vec![epochs * 2 / 3, epochs * 5 / 6],
            decay_factor: 0.1,
        },
        training_attack: AttackConfig {
            family: "pgd".into(),
            steps: 10,
            step_size_255: 2.0,
            epsilon_255: 8.0,
            restarts: 1,
            random_init: true,
            targeted: false,
        },
        fixed_eps_255: None,
        iaat: Some(IaatParams {
            n_warm: 5,
            eps_w_255: 8.0,
            gamma_255: 1.9,
            beta,
            eps_min_255: 0.0,
            eps_max_255: eps_max,
            selection_attack: Some(AttackConfig {
                family: "pgd".into(),
                steps: sel_steps,
                step_size_255: sel_alpha,
                epsilon_255: 8.0,
                restarts: sel_restarts,
                random_init: true,
                targeted: false,
            }),
        }),
        eval: EvalConfig {
            protocols: vec![
                ProtocolConfig {
                    steps: 10,
                    restarts: 3,
                    epsilon_255: 8.0,
                    targeted: false,
                    stands_in_for: Some("PGD100x5".into()),
                },
                ProtocolConfig {
                    steps: 50,
                    restarts: 2,
                    epsilon_255: 8.0,
                    targeted: false,
                    stands_in_for: Some("PGD1000x2".into()),
                },
            ],
            sweep_eps_255: vec![0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            sweep_steps: 10,
            sweep_restarts: 1,
            corruption_severities: vec![],
        },
        seed,
        output_dir: None,
    }
}
