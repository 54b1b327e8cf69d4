//! Deterministic numeric kernel: dense tensors, layers with manual
//! backpropagation, optimizers, a seeded PRNG, and a finite-difference
//! gradient checker.
//!
//! Everything is `f64` and single-threaded; identical seeds and inputs give
//! bit-identical results.

mod checkpoint;
mod gradcheck;
mod layer;
mod optim;
mod rng;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::grad_check;
pub use layer::{softmax, Activation, DenseCache, DenseLayer};
pub use optim::{Adam, Optimizer, OptimizerKind};
pub use rng::{derive_seed, Rng};
pub use tensor::{dot, Tensor2};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumKitError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, NumKitError>;

/// Numerically stable `ln(sigmoid(x))`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverted-dropout mask: entries are `0` with probability `p`, else
/// `1/(1-p)`, so inference needs no rescaling.
pub fn dropout_mask(rng: &mut Rng, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 - p;
    (0..len)
        .map(|_| if rng.uniform() < p { 0.0 } else { 1.0 / keep })
        .collect()
}
