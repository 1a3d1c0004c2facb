use crate::error::Result;
use crate::tensor::{Scalar, Var};

/// GEGLU feed-forward: `((x·W_a) ⊙ gelu(x·W_b)) · W_out`, bias-free.
pub fn geglu_ffn<T: Scalar>(x: &Var<T>, w_a: &Var<T>, w_b: &Var<T>, w_out: &Var<T>) -> Result<Var<T>> {
    let value = x.matmul(w_a)?;
    let gate = x.matmul(w_b)?.gelu();
    value.mul(&gate)?.matmul(w_out)
}
