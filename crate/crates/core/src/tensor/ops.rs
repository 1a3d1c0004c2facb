//! Elementwise, matrix and shape ops on [`Var`].

use super::var::Backprop;
use super::{gemm, Scalar, Tensor, Var};
use crate::error::{Error, Result};

/// Tanh-approximation GELU constant `sqrt(2/pi)`.
const GELU_C: f64 = 0.797_884_560_802_865_4;
const GELU_A: f64 = 0.044_715;

/// `tanh` through `exp`, several times faster than the libm routine for f32.
#[inline]
fn tanh<T: Scalar>(u: T) -> T {
    let two = T::of(2.0);
    T::one() - two / ((two * u).exp() + T::one())
}

#[derive(Clone, Copy)]
enum Broadcast {
    Same,
    /// `b` is a vector over the last axis of `a`.
    Trailing,
}

fn broadcast_kind(op: &'static str, a: &[usize], b: &[usize]) -> Result<Broadcast> {
    if a == b {
        Ok(Broadcast::Same)
    } else if b.len() == 1 && a.last() == Some(&b[0]) {
        Ok(Broadcast::Trailing)
    } else {
        Err(Error::dim(op, a, b))
    }
}

/// Sums a `[rows, cols]` view down to `cols`.
fn sum_rows<T: Scalar>(g: &Tensor<T>, cols: usize) -> Tensor<T> {
    let mut acc = vec![0.0f64; cols];
    for row in g.data().chunks(cols) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v.f64();
        }
    }
    Tensor::from_parts(vec![cols], acc.into_iter().map(T::of).collect())
}

fn binary_values<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    kind: Broadcast,
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    match kind {
        Broadcast::Same => a.zip_map(b, f),
        Broadcast::Trailing => {
            let cols = b.len();
            let mut out = Vec::with_capacity(a.len());
            for row in a.data().chunks(cols) {
                out.extend(row.iter().zip(b.data()).map(|(&x, &y)| f(x, y)));
            }
            Tensor::from_parts(a.shape().to_vec(), out)
        }
    }
}

impl<T: Scalar> Var<T> {
    /// `a + b`; `b` may also be a vector over the last axis of `a`.
    pub fn add(&self, other: &Var<T>) -> Result<Var<T>> {
        let kind = broadcast_kind("add", self.shape(), other.shape())?;
        let value = binary_values(self.value(), other.value(), kind, |x, y| x + y);
        Ok(Var::from_op(
            "add",
            value,
            vec![self.clone(), other.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let gb = ctx.needs(1).then(|| match kind {
                    Broadcast::Same => ctx.grad.clone(),
                    Broadcast::Trailing => sum_rows(ctx.grad, ctx.input(1).len()),
                });
                vec![ctx.needs(0).then(|| ctx.grad.clone()), gb]
            }),
        ))
    }

    /// `a - b` with the same broadcasting as [`Var::add`].
    pub fn sub(&self, other: &Var<T>) -> Result<Var<T>> {
        let kind = broadcast_kind("sub", self.shape(), other.shape())?;
        let value = binary_values(self.value(), other.value(), kind, |x, y| x - y);
        Ok(Var::from_op(
            "sub",
            value,
            vec![self.clone(), other.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let gb = ctx.needs(1).then(|| {
                    let g = match kind {
                        Broadcast::Same => ctx.grad.clone(),
                        Broadcast::Trailing => sum_rows(ctx.grad, ctx.input(1).len()),
                    };
                    g.map(|v| -v)
                });
                vec![ctx.needs(0).then(|| ctx.grad.clone()), gb]
            }),
        ))
    }

    /// Elementwise product; `b` may be a vector over the last axis of `a`.
    pub fn mul(&self, other: &Var<T>) -> Result<Var<T>> {
        let kind = broadcast_kind("mul", self.shape(), other.shape())?;
        let value = binary_values(self.value(), other.value(), kind, |x, y| x * y);
        Ok(Var::from_op(
            "mul",
            value,
            vec![self.clone(), other.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let (a, b) = (ctx.input(0), ctx.input(1));
                let ga = ctx
                    .needs(0)
                    .then(|| binary_values(ctx.grad, b, kind, |g, y| g * y));
                let gb = ctx.needs(1).then(|| match kind {
                    Broadcast::Same => ctx.grad.zip_map(a, |g, x| g * x),
                    Broadcast::Trailing => sum_rows(&ctx.grad.zip_map(a, |g, x| g * x), b.len()),
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&self, factor: f64) -> Var<T> {
        let c = T::of(factor);
        Var::from_op(
            "scale",
            self.value().map(|v| v * c),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| vec![Some(ctx.grad.map(|g| g * c))]),
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Var<T> {
        let c = T::of(GELU_C);
        let a = T::of(GELU_A);
        let half = T::of(0.5);
        let one = T::one();
        Var::from_op(
            "gelu",
            self.value()
                .map(|x| half * x * (one + tanh(c * (x + a * x * x * x)))),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let three = T::of(3.0);
                vec![Some(ctx.grad.zip_map(ctx.input(0), |g, x| {
                    let t = tanh(c * (x + a * x * x * x));
                    let d = half * (one + t) + half * x * (one - t * t) * c * (one + three * a * x * x);
                    g * d
                }))]
            }),
        )
    }

    pub fn relu(&self) -> Var<T> {
        Var::from_op(
            "relu",
            self.value().map(|x| if x > T::zero() { x } else { T::zero() }),
            vec![self.clone()],
            Box::new(|ctx: &Backprop<'_, T>| {
                vec![Some(ctx.grad.zip_map(ctx.input(0), |g, x| {
                    if x > T::zero() {
                        g
                    } else {
                        T::zero()
                    }
                }))]
            }),
        )
    }

    pub fn sigmoid(&self) -> Var<T> {
        Var::from_op(
            "sigmoid",
            self.value().map(|x| T::one() / (T::one() + (-x).exp())),
            vec![self.clone()],
            Box::new(|ctx: &Backprop<'_, T>| {
                vec![Some(ctx.grad.zip_map(ctx.output, |g, s| g * s * (T::one() - s)))]
            }),
        )
    }

    /// `a[..., m, k] · b[k, n] -> [..., m, n]`; leading axes of `a` are flattened into rows.
    pub fn matmul(&self, other: &Var<T>) -> Result<Var<T>> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() < 2 || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::dim("matmul", sa, sb));
        }
        let k = sb[0];
        let n = sb[1];
        let m = self.value().len() / k;
        let mut out_shape = sa.to_vec();
        *out_shape.last_mut().expect("rank >= 2") = n;
        let mut out = vec![T::zero(); m * n];
        gemm(m, k, n, self.value().data(), false, other.value().data(), false, &mut out, false);
        Ok(Var::from_op(
            "matmul",
            Tensor::from_parts(out_shape, out),
            vec![self.clone(), other.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let g = ctx.grad.data();
                let ga = ctx.needs(0).then(|| {
                    let mut d = vec![T::zero(); m * k];
                    gemm(m, n, k, g, false, ctx.input(1).data(), true, &mut d, false);
                    Tensor::from_parts(ctx.input(0).shape().to_vec(), d)
                });
                let gb = ctx.needs(1).then(|| {
                    let mut d = vec![T::zero(); k * n];
                    gemm(k, m, n, ctx.input(0).data(), true, g, false, &mut d, false);
                    Tensor::from_parts(vec![k, n], d)
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Batched product over matching leading axes: `a[..., m, k] · b[..., k, n]`,
    /// or `a · bᵀ` with `b[..., n, k]` when `transpose_b` is set.
    pub fn batched_matmul(&self, other: &Var<T>, transpose_b: bool) -> Result<Var<T>> {
        let (sa, sb) = (self.shape(), other.shape());
        let r = sa.len();
        if r < 2 || sb.len() != r || sa[..r - 2] != sb[..r - 2] {
            return Err(Error::dim("batched_matmul", sa, sb));
        }
        let (m, k) = (sa[r - 2], sa[r - 1]);
        let (kb, n) = if transpose_b {
            (sb[r - 1], sb[r - 2])
        } else {
            (sb[r - 2], sb[r - 1])
        };
        if kb != k {
            return Err(Error::dim("batched_matmul", sa, sb));
        }
        let batch: usize = sa[..r - 2].iter().product();
        let mut out_shape = sa[..r - 2].to_vec();
        out_shape.extend([m, n]);
        let (a, b) = (self.value().data(), other.value().data());
        let mut out = vec![T::zero(); batch * m * n];
        for i in 0..batch {
            gemm(
                m,
                k,
                n,
                &a[i * m * k..],
                false,
                &b[i * k * n..],
                transpose_b,
                &mut out[i * m * n..],
                false,
            );
        }
        Ok(Var::from_op(
            "batched_matmul",
            Tensor::from_parts(out_shape, out),
            vec![self.clone(), other.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let g = ctx.grad.data();
                let (a, b) = (ctx.input(0).data(), ctx.input(1).data());
                let ga = ctx.needs(0).then(|| {
                    let mut d = vec![T::zero(); batch * m * k];
                    for i in 0..batch {
                        // dA = G·Bᵀ, or G·B when B was already transposed.
                        gemm(
                            m,
                            n,
                            k,
                            &g[i * m * n..],
                            false,
                            &b[i * k * n..],
                            !transpose_b,
                            &mut d[i * m * k..],
                            false,
                        );
                    }
                    Tensor::from_parts(ctx.input(0).shape().to_vec(), d)
                });
                let gb = ctx.needs(1).then(|| {
                    let mut d = vec![T::zero(); batch * k * n];
                    for i in 0..batch {
                        if transpose_b {
                            // dB[n×k] = Gᵀ·A
                            gemm(n, m, k, &g[i * m * n..], true, &a[i * m * k..], false, &mut d[i * k * n..], false);
                        } else {
                            // dB[k×n] = Aᵀ·G
                            gemm(k, m, n, &a[i * m * k..], true, &g[i * m * n..], false, &mut d[i * k * n..], false);
                        }
                    }
                    Tensor::from_parts(ctx.input(1).shape().to_vec(), d)
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<T>> {
        let value = self.value().clone().reshape(shape)?;
        Ok(Var::from_op(
            "reshape",
            value,
            vec![self.clone()],
            Box::new(|ctx: &Backprop<'_, T>| {
                vec![Some(Tensor::from_parts(
                    ctx.input(0).shape().to_vec(),
                    ctx.grad.data().to_vec(),
                ))]
            }),
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Var<T>> {
        let value = permute_tensor(self.value(), axes)?;
        let mut inverse = vec![0; axes.len()];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        Ok(Var::from_op(
            "permute",
            value,
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                vec![Some(
                    permute_tensor(ctx.grad, &inverse).expect("inverse permutation is valid"),
                )]
            }),
        ))
    }

    /// Picks position `index` along `axis`, dropping that axis.
    pub fn select(&self, axis: usize, index: usize) -> Result<Var<T>> {
        let shape = self.shape();
        if axis >= shape.len() || index >= shape[axis] {
            return Err(Error::Contract(format!(
                "select index {index} on axis {axis} of shape {shape:?}"
            )));
        }
        let (outer, len, inner) = super::split_axis(shape, axis);
        let src = self.value().data();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * len + index) * inner;
            out.extend_from_slice(&src[base..base + inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        Ok(Var::from_op(
            "select",
            Tensor::from_parts(out_shape, out),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let mut d = Tensor::zeros(ctx.input(0).shape());
                let dd = d.data_mut();
                for (o, chunk) in ctx.grad.data().chunks(inner).enumerate() {
                    let base = (o * len + index) * inner;
                    dd[base..base + inner].copy_from_slice(chunk);
                }
                vec![Some(d)]
            }),
        ))
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<T>], axis: usize) -> Result<Var<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let rank = first.shape().len();
        if axis >= rank {
            return Err(Error::Contract(format!("concat axis {axis} for rank {rank}")));
        }
        for p in parts {
            let s = p.shape();
            if s.len() != rank
                || s.iter()
                    .zip(first.shape())
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::dim("concat", first.shape(), s));
            }
        }
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let (outer, _, inner) = super::split_axis(first.shape(), axis);
        let total: usize = lens.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &len) in parts.iter().zip(&lens) {
                let src = p.value().data();
                out.extend_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut out_shape = first.shape().to_vec();
        out_shape[axis] = total;
        Ok(Var::from_op(
            "concat",
            Tensor::from_parts(out_shape, out),
            parts.to_vec(),
            Box::new(move |ctx: &Backprop<'_, T>| {
                let g = ctx.grad.data();
                let mut grads: Vec<Vec<T>> =
                    lens.iter().map(|&l| Vec::with_capacity(outer * l * inner)).collect();
                let mut offset = 0;
                for _ in 0..outer {
                    for (buf, &len) in grads.iter_mut().zip(&lens) {
                        buf.extend_from_slice(&g[offset..offset + len * inner]);
                        offset += len * inner;
                    }
                }
                grads
                    .into_iter()
                    .enumerate()
                    .map(|(i, buf)| {
                        ctx.needs(i)
                            .then(|| Tensor::from_parts(ctx.input(i).shape().to_vec(), buf))
                    })
                    .collect()
            }),
        ))
    }

    /// Repeats size-1 axes up to `shape` (same rank).
    pub fn expand(&self, shape: &[usize]) -> Result<Var<T>> {
        let src_shape = self.shape().to_vec();
        if src_shape.len() != shape.len()
            || src_shape
                .iter()
                .zip(shape)
                .any(|(&s, &t)| s != t && s != 1)
        {
            return Err(Error::dim("expand", &src_shape, shape));
        }
        let map = broadcast_index_map(&src_shape, shape);
        let src = self.value().data();
        let value = Tensor::from_parts(shape.to_vec(), map.iter().map(|&i| src[i]).collect());
        Ok(Var::from_op(
            "expand",
            value,
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let mut acc = vec![0.0f64; ctx.input(0).len()];
                for (&i, g) in map.iter().zip(ctx.grad.data()) {
                    acc[i] += g.f64();
                }
                vec![Some(Tensor::from_parts(
                    ctx.input(0).shape().to_vec(),
                    acc.into_iter().map(T::of).collect(),
                ))]
            }),
        ))
    }
}

/// For each output position, the flat source index under size-1 broadcasting.
fn broadcast_index_map(src: &[usize], dst: &[usize]) -> Vec<usize> {
    let mut src_strides = vec![0usize; src.len()];
    let mut acc = 1;
    for i in (0..src.len()).rev() {
        src_strides[i] = if src[i] == 1 { 0 } else { acc };
        acc *= src[i];
    }
    let total: usize = dst.iter().product();
    let mut idx = vec![0usize; dst.len()];
    let mut out = Vec::with_capacity(total);
    let mut flat = 0usize;
    for _ in 0..total {
        out.push(flat);
        for ax in (0..dst.len()).rev() {
            idx[ax] += 1;
            flat += src_strides[ax];
            if idx[ax] < dst[ax] {
                break;
            }
            flat -= src_strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    out
}

pub(crate) fn permute_tensor<T: Scalar>(x: &Tensor<T>, axes: &[usize]) -> Result<Tensor<T>> {
    let shape = x.shape();
    let rank = shape.len();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
        return Err(Error::Contract(format!(
            "permutation {axes:?} is invalid for shape {shape:?}"
        )));
    }
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let src = x.data();
    let total = src.len();
    let mut out = Vec::with_capacity(total);
    if rank == 0 {
        return Ok(x.clone());
    }
    // Innermost output axis is copied in a tight loop.
    let last = rank - 1;
    let (inner_len, inner_stride) = (out_shape[last], strides[last]);
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    let outer = total / inner_len.max(1);
    for _ in 0..outer {
        if inner_stride == 1 {
            out.extend_from_slice(&src[base..base + inner_len]);
        } else {
            out.extend((0..inner_len).map(|j| src[base + j * inner_stride]));
        }
        for ax in (0..last).rev() {
            idx[ax] += 1;
            base += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            base -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    Ok(Tensor::from_parts(out_shape, out))
}
