use super::rope::{rope_apply, ROPE_BASE};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Var};

/// The four bias-free `D×D` projections of one attention sublayer.
pub struct AttentionWeights<'a, T: Scalar> {
    pub wq: &'a Var<T>,
    pub wk: &'a Var<T>,
    pub wv: &'a Var<T>,
    pub wo: &'a Var<T>,
}

/// Multi-head self-attention with rotary embeddings on queries and keys.
pub fn mhsa<T: Scalar>(x: &Var<T>, w: &AttentionWeights<'_, T>, n_heads: usize) -> Result<Var<T>> {
    mhsa_with_probs(x, w, n_heads).map(|(out, _)| out)
}

/// [`mhsa`] that also returns the `[B,H,S,S]` attention probabilities.
///
/// No mask: every token attends to every token, CLS included. Token `s`
/// sits at rotary position `s`.
pub fn mhsa_with_probs<T: Scalar>(
    x: &Var<T>,
    w: &AttentionWeights<'_, T>,
    n_heads: usize,
) -> Result<(Var<T>, Var<T>)> {
    let shape = x.shape();
    if shape.len() != 3 {
        return Err(Error::Config(format!("attention input must be [B,S,D], got {shape:?}")));
    }
    let (b, s, d) = (shape[0], shape[1], shape[2]);
    if n_heads == 0 || d % n_heads != 0 {
        return Err(Error::Config(format!("d_model {d} is not divisible by {n_heads} heads")));
    }
    let dh = d / n_heads;
    let positions: Vec<usize> = (0..s).collect();
    let heads = |proj: &Var<T>| -> Result<Var<T>> {
        x.matmul(proj)?
            .reshape(&[b, s, n_heads, dh])?
            .permute(&[0, 2, 1, 3])
    };
    let q = rope_apply(&heads(w.wq)?, &positions, ROPE_BASE)?;
    let k = rope_apply(&heads(w.wk)?, &positions, ROPE_BASE)?;
    let v = heads(w.wv)?;
    let scores = q.batched_matmul(&k, true)?.scale(1.0 / (dh as f64).sqrt());
    let probs = scores.softmax(3)?;
    let out = probs
        .batched_matmul(&v, false)?
        .permute(&[0, 2, 1, 3])?
        .reshape(&[b, s, d])?
        .matmul(w.wo)?;
    Ok((out, probs))
}
