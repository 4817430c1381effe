//! Dense linear algebra, activations, losses, Adam and initialization.
//!
//! Everything here is plain `f64` on the CPU with hand-derived gradients.
//! All routines are deterministic for identical inputs and seeds.

mod adam;
mod dense;
mod init;
mod matrix;
mod ops;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use dense::{dense_backward, dense_forward, Activation, Dense, DenseCache, DenseGrads};
pub use init::{derive_seed, kaiming_bound, kaiming_uniform_init, rng_from_seed, RngStream};
pub use matrix::{axpy, dot, norm, Matrix};
pub use ops::{
    argmax, cosine_sim, cross_entropy, l2_normalize, l2_normalize_backward, log_sum_exp, softmax,
    softmax_backward,
};

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
