use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Scalar, Tensor};

/// Truncation bound of the standard-normal draws, in standard deviations.
pub const TRUNC_BOUND: f64 = 2.0;

/// Standard normal samples restricted to `[-2, 2]` by rejection.
/// The same seed always yields the same tensor.
pub fn truncated_normal<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    truncated_normal_with(&mut rng, shape, 1.0)
}

/// `std · TN(0, 1; -2, 2)` drawn from an existing generator.
pub fn truncated_normal_with<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    shape: &[usize],
    std: f64,
) -> Tensor<T> {
    Tensor::from_fn(shape, |_| loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= TRUNC_BOUND {
            break T::of(z * std);
        }
    })
}
