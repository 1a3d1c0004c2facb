use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor, Var};

pub const ROPE_BASE: f64 = 10_000.0;

struct RotaryTable<T> {
    cos: Vec<T>,
    sin: Vec<T>,
    half: usize,
}

impl<T: Scalar> RotaryTable<T> {
    fn new(positions: &[usize], head_dim: usize, base: f64) -> Self {
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(positions.len() * half);
        let mut sin = Vec::with_capacity(positions.len() * half);
        for &p in positions {
            for i in 0..half {
                let theta = base.powf(-2.0 * i as f64 / head_dim as f64);
                let angle = p as f64 * theta;
                cos.push(T::of(angle.cos()));
                sin.push(T::of(angle.sin()));
            }
        }
        Self { cos, sin, half }
    }

    /// Rotates every `(x[2i], x[2i+1])` pair; `sign = -1` applies the inverse.
    fn rotate(&self, x: &[T], seq: usize, sign: T) -> Vec<T> {
        let dh = 2 * self.half;
        let mut out = vec![T::zero(); x.len()];
        for (block_in, block_out) in x.chunks(seq * dh).zip(out.chunks_mut(seq * dh)) {
            for s in 0..seq {
                let row = &block_in[s * dh..(s + 1) * dh];
                let dst = &mut block_out[s * dh..(s + 1) * dh];
                for i in 0..self.half {
                    let (c, sn) = (self.cos[s * self.half + i], sign * self.sin[s * self.half + i]);
                    let (a, b) = (row[2 * i], row[2 * i + 1]);
                    dst[2 * i] = a * c - b * sn;
                    dst[2 * i + 1] = a * sn + b * c;
                }
            }
        }
        out
    }
}

/// Rotary position embedding on `[..., S, d_h]`.
///
/// Pair `(x[2i], x[2i+1])` of the token at `positions[s]` is rotated by
/// `positions[s] · base^(-2i/d_h)`.
pub fn rope_apply<T: Scalar>(x: &Var<T>, positions: &[usize], base: f64) -> Result<Var<T>> {
    let shape = x.shape();
    if shape.len() < 2 {
        return Err(Error::Config(format!("rotary input needs rank >= 2, got {shape:?}")));
    }
    let (seq, dh) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if dh % 2 != 0 {
        return Err(Error::Config(format!("rotary head dimension {dh} is odd")));
    }
    if positions.len() != seq {
        return Err(Error::Config(format!(
            "{} rotary positions for sequence length {seq}",
            positions.len()
        )));
    }
    let table = RotaryTable::<T>::new(positions, dh, base);
    let value = Tensor::new(shape, table.rotate(x.value().data(), seq, T::one()))?;
    Ok(Var::from_op(
        "rope",
        value,
        vec![x.clone()],
        Box::new(move |ctx| {
            let g = table.rotate(ctx.grad.data(), seq, -T::one());
            vec![Some(Tensor::new(ctx.grad.shape(), g).expect("same shape"))]
        }),
    ))
}
