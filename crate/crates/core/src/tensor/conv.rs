//! Channels-last image kernels for the CNN baseline: 3×3 convolution,
//! 2×2 max pooling and batch normalization.

use super::var::Backprop;
use super::{gemm, Scalar, Tensor, Var};
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Whether batch norm uses batch statistics (and updates running ones) or
/// the stored running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running statistics of one batch-norm layer. Not learnable.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T: Scalar = f32> {
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::ones(&[channels]),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

/// Unfolds `[B,H,W,C]` into `[B·H·W, 9·C]` rows of zero-padded 3×3 neighbourhoods.
fn im2col<T: Scalar>(x: &[T], b: usize, h: usize, w: usize, c: usize) -> Vec<T> {
    let k = 9 * c;
    let mut cols = vec![T::zero(); b * h * w * k];
    for bi in 0..b {
        for y in 0..h {
            for xx in 0..w {
                let row = ((bi * h + y) * w + xx) * k;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let src = ((bi * h + sy as usize) * w + sx as usize) * c;
                        let dst = row + (ky * 3 + kx) * c;
                        cols[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the image.
fn col2im<T: Scalar>(cols: &[T], b: usize, h: usize, w: usize, c: usize) -> Vec<T> {
    let k = 9 * c;
    let mut x = vec![T::zero(); b * h * w * c];
    for bi in 0..b {
        for y in 0..h {
            for xx in 0..w {
                let row = ((bi * h + y) * w + xx) * k;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let dst = ((bi * h + sy as usize) * w + sx as usize) * c;
                        let src = row + (ky * 3 + kx) * c;
                        for (d, s) in x[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
    x
}

impl<T: Scalar> Var<T> {
    /// 3×3 cross-correlation, stride 1, zero same-padding, no bias.
    /// `self` is `[B,H,W,Cin]`, `kernel` is `[3,3,Cin,Cout]`.
    pub fn conv2d(&self, kernel: &Var<T>) -> Result<Var<T>> {
        let (xs, ks) = (self.shape(), kernel.shape());
        if xs.len() != 4 || ks.len() != 4 || ks[0] != 3 || ks[1] != 3 || ks[2] != xs[3] {
            return Err(Error::dim("conv2d", xs, ks));
        }
        let (b, h, w, cin, cout) = (xs[0], xs[1], xs[2], xs[3], ks[3]);
        let rows = b * h * w;
        let k = 9 * cin;
        let cols = im2col(self.value().data(), b, h, w, cin);
        let mut out = vec![T::zero(); rows * cout];
        gemm(rows, k, cout, &cols, false, kernel.value().data(), false, &mut out, false);
        drop(cols);
        Ok(Var::from_op(
            "conv2d",
            Tensor::from_parts(vec![b, h, w, cout], out),
            vec![self.clone(), kernel.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let g = ctx.grad.data();
                let gk = ctx.needs(1).then(|| {
                    let cols = im2col(ctx.input(0).data(), b, h, w, cin);
                    let mut d = vec![T::zero(); k * cout];
                    gemm(k, rows, cout, &cols, true, g, false, &mut d, false);
                    Tensor::from_parts(vec![3, 3, cin, cout], d)
                });
                let gx = ctx.needs(0).then(|| {
                    let mut dcols = vec![T::zero(); rows * k];
                    gemm(rows, cout, k, g, false, ctx.input(1).data(), true, &mut dcols, false);
                    Tensor::from_parts(vec![b, h, w, cin], col2im(&dcols, b, h, w, cin))
                });
                vec![gx, gk]
            }),
        ))
    }

    /// 2×2 max pooling with stride 2 on `[B,H,W,C]`. Gradient flows to the
    /// first maximal element in row-major window order.
    pub fn maxpool2d(&self) -> Result<Var<T>> {
        let xs = self.shape();
        if xs.len() != 4 || !xs[1].is_multiple_of(2) || !xs[2].is_multiple_of(2) {
            return Err(Error::dim("maxpool2d", xs, &[2, 2]));
        }
        let (b, h, w, c) = (xs[0], xs[1], xs[2], xs[3]);
        let (oh, ow) = (h / 2, w / 2);
        let src = self.value().data();
        let mut out = Vec::with_capacity(b * oh * ow * c);
        let mut argmax = Vec::with_capacity(b * oh * ow * c);
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best_i = ((bi * h + 2 * oy) * w + 2 * ox) * c + ch;
                        let mut best = src[best_i];
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let i = ((bi * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                            if src[i] > best {
                                best = src[i];
                                best_i = i;
                            }
                        }
                        out.push(best);
                        argmax.push(best_i);
                    }
                }
            }
        }
        Ok(Var::from_op(
            "maxpool2d",
            Tensor::from_parts(vec![b, oh, ow, c], out),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let mut d = Tensor::zeros(ctx.input(0).shape());
                let dd = d.data_mut();
                for (&i, &g) in argmax.iter().zip(ctx.grad.data()) {
                    dd[i] += g;
                }
                vec![Some(d)]
            }),
        ))
    }

    /// Batch normalization over every axis but the last (channels).
    ///
    /// Train mode normalizes with biased batch statistics and folds the
    /// unbiased variance into the running estimate; eval mode uses the running
    /// statistics. `gamma` and `beta` are the only learnable parameters.
    pub fn batch_norm2d(
        &self,
        gamma: &Var<T>,
        beta: &Var<T>,
        state: &mut BatchNormState<T>,
        mode: Mode,
    ) -> Result<Var<T>> {
        let xs = self.shape().to_vec();
        let c = *xs.last().unwrap_or(&0);
        if gamma.shape() != [c] || beta.shape() != [c] || state.channels() != c {
            return Err(Error::dim("batch_norm2d", &xs, gamma.shape()));
        }
        let n = self.value().len() / c.max(1);
        if n == 0 || c == 0 {
            return Err(Error::Contract("batch_norm2d on an empty batch".into()));
        }
        let src = self.value().data();
        let (mean, var) = match mode {
            Mode::Train => {
                let mut sum = vec![0.0f64; c];
                let mut sq = vec![0.0f64; c];
                for row in src.chunks(c) {
                    for ((s, q), v) in sum.iter_mut().zip(sq.iter_mut()).zip(row) {
                        let v = v.f64();
                        *s += v;
                        *q += v * v;
                    }
                }
                let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
                let mut var = vec![0.0f64; c];
                // Two-pass variance for accuracy.
                for row in src.chunks(c) {
                    for ((vv, m), x) in var.iter_mut().zip(&mean).zip(row) {
                        let d = x.f64() - m;
                        *vv += d * d;
                    }
                }
                let var: Vec<f64> = var.iter().map(|v| v / n as f64).collect();
                let mom = state.momentum;
                let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
                for ch in 0..c {
                    let rm = &mut state.running_mean.data_mut()[ch];
                    *rm = T::of((1.0 - mom) * rm.f64() + mom * mean[ch]);
                    let rv = &mut state.running_var.data_mut()[ch];
                    *rv = T::of((1.0 - mom) * rv.f64() + mom * var[ch] * unbias);
                }
                (mean, var)
            }
            Mode::Eval => (
                state.running_mean.data().iter().map(|v| v.f64()).collect(),
                state.running_var.data().iter().map(|v| v.f64()).collect(),
            ),
        };
        let inv_std: Vec<T> = var.iter().map(|v| T::of(1.0 / (v + state.eps).sqrt())).collect();
        let mean_t: Vec<T> = mean.iter().map(|&m| T::of(m)).collect();
        let (g, bt) = (gamma.value().data(), beta.value().data());
        let mut xhat = Vec::with_capacity(src.len());
        let mut out = Vec::with_capacity(src.len());
        for row in src.chunks(c) {
            for ch in 0..c {
                let xh = (row[ch] - mean_t[ch]) * inv_std[ch];
                xhat.push(xh);
                out.push(g[ch] * xh + bt[ch]);
            }
        }
        let xhat = Tensor::from_parts(xs.clone(), xhat);
        Ok(Var::from_op(
            "batch_norm2d",
            Tensor::from_parts(xs, out),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let gr = ctx.grad.data();
                let xh = xhat.data();
                let mut dbeta = vec![0.0f64; c];
                let mut dgamma = vec![0.0f64; c];
                for (grow, xrow) in gr.chunks(c).zip(xh.chunks(c)) {
                    for ch in 0..c {
                        dbeta[ch] += grow[ch].f64();
                        dgamma[ch] += grow[ch].f64() * xrow[ch].f64();
                    }
                }
                let gamma = ctx.input(1).data();
                let dx = ctx.needs(0).then(|| {
                    let mut d = Vec::with_capacity(gr.len());
                    match mode {
                        Mode::Train => {
                            let nf = T::of(n as f64);
                            let scale: Vec<T> = (0..c)
                                .map(|ch| gamma[ch] * inv_std[ch] / nf)
                                .collect();
                            let db: Vec<T> = dbeta.iter().map(|&v| T::of(v)).collect();
                            let dg: Vec<T> = dgamma.iter().map(|&v| T::of(v)).collect();
                            for (grow, xrow) in gr.chunks(c).zip(xh.chunks(c)) {
                                for ch in 0..c {
                                    d.push(scale[ch] * (nf * grow[ch] - db[ch] - xrow[ch] * dg[ch]));
                                }
                            }
                        }
                        Mode::Eval => {
                            for grow in gr.chunks(c) {
                                for ch in 0..c {
                                    d.push(grow[ch] * gamma[ch] * inv_std[ch]);
                                }
                            }
                        }
                    }
                    Tensor::from_parts(ctx.input(0).shape().to_vec(), d)
                });
                let to_t = |v: Vec<f64>| Tensor::from_parts(vec![c], v.into_iter().map(T::of).collect());
                vec![
                    dx,
                    ctx.needs(1).then(|| to_t(dgamma)),
                    ctx.needs(2).then(|| to_t(dbeta)),
                ]
            }),
        ))
    }
}
