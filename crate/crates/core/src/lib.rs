//! Instance-adaptive adversarial training at desk scale.
//!
//! The crate provides the pure-computation half of the project: a small
//! dense/convolutional network stack with exact reverse-mode gradients,
//! l-infinity attacks (FGSM and PGD with random restarts), the per-sample
//! epsilon-memory training loop, synthetic datasets with analytically known
//! margins, and the evaluation protocols built on top of them.
//!
//! No IO lives here. File formats, checkpoints, plots and the experiment
//! CLI are in the companion `iaat-cli` crate. The crate is `no_std`
//! compatible (`alloc` required); disable the default `std` feature to use
//! it in that mode.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod adaptive;
pub mod attack;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
