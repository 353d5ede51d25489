//! Differentiable building blocks: dense and GRU layers, batch
//! normalization, dropout, MAE loss and the Adam optimizer. Every backward
//! pass is analytic and checked against central finite differences.

mod adam;
mod batchnorm;
mod dense;
mod dropout;
pub mod gradcheck;
mod gru;
mod loss;

pub use adam::AdamState;
pub use batchnorm::{BatchNormLayer, BnCache};
pub use dense::DenseLayer;
pub use dropout::Dropout;
pub use gru::{GruCache, GruLayer};
pub use loss::{mae_loss, two_head_mae};

use crate::linalg::Matrix;
use crate::rng::Rng;

/// Forward-pass mode. Training uses batch statistics and dropout; inference
/// is deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Uniform Glorot initialization in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.range(-bound, bound))
}

/// Elementwise tanh.
pub fn tanh_forward(x: &Matrix) -> Matrix {
    x.map(f64::tanh)
}

/// Gradient through tanh given the forward *output* y: dx = dy ⊙ (1 − y²).
pub fn tanh_backward(y: &Matrix, grad_out: &Matrix) -> Matrix {
    let mut out = grad_out.clone();
    for (g, &yv) in out.data_mut().iter_mut().zip(y.data()) {
        *g *= 1.0 - yv * yv;
    }
    out
}
