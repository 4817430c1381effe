use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain_err, Result};
use crate::numerics::matrix::Matrix;

/// Deterministic random stream. ChaCha8 produces the same sequence for a
/// given seed on every platform.
pub type RngStream = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> RngStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed (splitmix64 finalizer over `seed ^ index`).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn kaiming_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

/// I.i.d. samples from `U[-√(6/fan_in), +√(6/fan_in)]`.
pub fn kaiming_uniform_init<R: Rng + ?Sized>(
    fan_in: usize,
    shape: (usize, usize),
    rng: &mut R,
) -> Result<Matrix> {
    if fan_in == 0 {
        return domain_err("Kaiming initialization needs fan_in >= 1");
    }
    let bound = kaiming_bound(fan_in);
    let data = (0..shape.0 * shape.1)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Matrix::from_vec(shape.0, shape.1, data)
}
