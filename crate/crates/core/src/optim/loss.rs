use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor, Var};

/// Mean cross-entropy of `[B,K]` logits against `(1−ε)·onehot + ε/K`.
///
/// Fused with the log-softmax, so the backward rule is
/// `(softmax(ℓ) − target) / B`.
pub fn label_smoothed_ce<T: Scalar>(logits: &Var<T>, labels: &[usize], smoothing: f64) -> Result<Var<T>> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 {
        return Err(Error::Contract(format!(
            "cross-entropy expects [B,K] logits for {} labels, got {shape:?}",
            labels.len()
        )));
    }
    let (b, k) = (shape[0], shape[1]);
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Data(format!("label {bad} outside [0, {k})")));
    }
    let off = smoothing / k as f64;
    let on = 1.0 - smoothing + off;
    let mut probs = Vec::with_capacity(b * k);
    let mut total = 0.0f64;
    for (row, &y) in logits.value().data().chunks(k).zip(labels) {
        let max = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric(format!("non-finite logit {max}")));
        }
        let sum: f64 = row.iter().map(|v| (v.f64() - max).exp()).sum();
        let log_z = max + sum.ln();
        for (j, v) in row.iter().enumerate() {
            let log_p = v.f64() - log_z;
            let target = if j == y { on } else { off };
            total -= target * log_p;
            probs.push(log_p.exp());
        }
    }
    let labels = labels.to_vec();
    Ok(Var::from_op(
        "cross_entropy",
        Tensor::scalar(T::of(total / b as f64)),
        vec![logits.clone()],
        Box::new(move |ctx| {
            let scale = ctx.grad.data()[0].f64() / b as f64;
            let mut d = Vec::with_capacity(b * k);
            for (i, p) in probs.iter().enumerate() {
                let target = if i % k == labels[i / k] { on } else { off };
                d.push(T::of((p - target) * scale));
            }
            vec![Some(Tensor::from_parts(vec![b, k], d))]
        }),
    ))
}
