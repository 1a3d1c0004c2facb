use crate::error::Result;
use crate::tensor::{Scalar, Var};

/// Added to the mean square before the square root.
pub const RMS_EPS: f64 = 1e-6;

/// `x / sqrt(mean(x²) + ε) ⊙ gain` over the last axis.
pub fn rmsnorm<T: Scalar>(x: &Var<T>, gain: &Var<T>) -> Result<Var<T>> {
    x.rms_normalize(RMS_EPS).mul(gain)
}
