//! Reductions and normalizations. All sums accumulate in `f64`.

use super::var::Backprop;
use super::{split_axis, Scalar, Tensor, Var};
use crate::error::{Error, Result};

/// Max-subtracted softmax of one contiguous row.
fn softmax_row<T: Scalar>(row: &[T], dst: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = 0.0f64;
    for (d, &v) in dst.iter_mut().zip(row) {
        *d = (v - max).exp();
        total += d.f64();
    }
    let inv = T::of(1.0 / total);
    for d in dst.iter_mut() {
        *d *= inv;
    }
}

impl<T: Scalar> Var<T> {
    /// Sum of all elements as a scalar.
    pub fn sum(&self) -> Var<T> {
        Var::from_op(
            "sum",
            Tensor::scalar(T::of(self.value().sum_f64())),
            vec![self.clone()],
            Box::new(|ctx: &Backprop<'_, T>| {
                vec![Some(Tensor::full(ctx.input(0).shape(), ctx.grad.data()[0]))]
            }),
        )
    }

    /// Mean of all elements as a scalar.
    pub fn mean(&self) -> Var<T> {
        let n = self.value().len().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Mean along `axis`, dropping it.
    pub fn mean_axis(&self, axis: usize) -> Result<Var<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(Error::Contract(format!(
                "mean over axis {axis} of shape {shape:?}"
            )));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value().data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut acc = vec![0.0f64; inner];
        for o in 0..outer {
            acc.fill(0.0);
            for l in 0..len {
                let row = &src[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v.f64();
                }
            }
            out.extend(acc.iter().map(|a| T::of(a / len as f64)));
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        Ok(Var::from_op(
            "mean_axis",
            Tensor::from_parts(out_shape, out),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let scale = T::of(1.0 / len as f64);
                let g = ctx.grad.data();
                let mut d = Vec::with_capacity(outer * len * inner);
                for o in 0..outer {
                    let row = &g[o * inner..(o + 1) * inner];
                    for _ in 0..len {
                        d.extend(row.iter().map(|&v| v * scale));
                    }
                }
                vec![Some(Tensor::from_parts(shape.clone(), d))]
            }),
        ))
    }

    /// Softmax along `axis`, stabilized by subtracting the per-slice maximum.
    pub fn softmax(&self, axis: usize) -> Result<Var<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::Contract(format!(
                "softmax axis {axis} for shape {shape:?}"
            )));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.value().data();
        if let Some(v) = src.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("softmax input contains {v}")));
        }
        let mut out = vec![T::zero(); src.len()];
        if inner == 1 {
            for (row, dst) in src.chunks(len).zip(out.chunks_mut(len)) {
                softmax_row(row, dst);
            }
        } else {
            let mut row = vec![T::zero(); len];
            let mut dst = vec![T::zero(); len];
            for o in 0..outer {
                for i in 0..inner {
                    for l in 0..len {
                        row[l] = src[(o * len + l) * inner + i];
                    }
                    softmax_row(&row, &mut dst);
                    for l in 0..len {
                        out[(o * len + l) * inner + i] = dst[l];
                    }
                }
            }
        }
        Ok(Var::from_op(
            "softmax",
            Tensor::from_parts(shape, out),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                let (y, g) = (ctx.output.data(), ctx.grad.data());
                let mut d = vec![T::zero(); y.len()];
                if inner == 1 {
                    for ((y, g), d) in y.chunks(len).zip(g.chunks(len)).zip(d.chunks_mut(len)) {
                        let dot = T::of(g.iter().zip(y).map(|(g, y)| g.f64() * y.f64()).sum::<f64>());
                        for ((d, &y), &g) in d.iter_mut().zip(y).zip(g) {
                            *d = y * (g - dot);
                        }
                    }
                    return vec![Some(Tensor::from_parts(ctx.output.shape().to_vec(), d))];
                }
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |l: usize| (o * len + l) * inner + i;
                        let dot: f64 = (0..len).map(|l| g[at(l)].f64() * y[at(l)].f64()).sum();
                        let dot = T::of(dot);
                        for l in 0..len {
                            d[at(l)] = y[at(l)] * (g[at(l)] - dot);
                        }
                    }
                }
                vec![Some(Tensor::from_parts(ctx.output.shape().to_vec(), d))]
            }),
        ))
    }

    /// `x / sqrt(mean(x²) + eps)` over the last axis, with no gain.
    pub fn rms_normalize(&self, eps: f64) -> Var<T> {
        let width = *self.shape().last().unwrap_or(&1);
        let src = self.value().data();
        let rows = src.len() / width.max(1);
        let mut inv_rms = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(src.len());
        for row in src.chunks(width) {
            let ms: f64 = row.iter().map(|v| v.f64() * v.f64()).sum::<f64>() / width as f64;
            let r = 1.0 / (ms + eps).sqrt();
            inv_rms.push(r);
            let rt = T::of(r);
            out.extend(row.iter().map(|&v| v * rt));
        }
        Var::from_op(
            "rms_normalize",
            Tensor::from_parts(self.shape().to_vec(), out),
            vec![self.clone()],
            Box::new(move |ctx: &Backprop<'_, T>| {
                // dx = r·g − r³·x·mean(g⊙x)
                let (x, g) = (ctx.input(0).data(), ctx.grad.data());
                let mut d = Vec::with_capacity(x.len());
                for ((xr, gr), &r) in x.chunks(width).zip(g.chunks(width)).zip(&inv_rms) {
                    let dot: f64 =
                        xr.iter().zip(gr).map(|(a, b)| a.f64() * b.f64()).sum::<f64>() / width as f64;
                    let (rt, c) = (T::of(r), T::of(r * r * r * dot));
                    d.extend(xr.iter().zip(gr).map(|(&xv, &gv)| rt * gv - c * xv));
                }
                vec![Some(Tensor::from_parts(ctx.input(0).shape().to_vec(), d))]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(shape: &[usize], x: &[f64]) -> Var<f64> {
        Var::constant(Tensor::from_f64(shape, x).unwrap())
    }

    #[test]
    fn uniform_softmax() {
        let y = v(&[3], &[0.0, 0.0, 0.0]).softmax(0).unwrap();
        for p in y.value().data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let x = [1.0f64, 2.0, 3.0];
        let denom: f64 = x.iter().map(|a| a.exp()).sum();
        let y = v(&[3], &x).softmax(0).unwrap();
        for (p, a) in y.value().data().iter().zip(x) {
            assert!((p - a.exp() / denom).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(
            v(&[2], &[f64::NAN, 0.0]).softmax(0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn softmax_on_middle_axis_normalizes_that_axis() {
        let x = Var::constant(Tensor::<f64>::from_fn(&[2, 3, 2], |i| (i as f64).sin()));
        let y = x.softmax(1).unwrap();
        let d = y.value().data();
        for o in 0..2 {
            for i in 0..2 {
                let s: f64 = (0..3).map(|l| d[(o * 3 + l) * 2 + i]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rms_of_three_four() {
        let y = v(&[2], &[3.0, 4.0]).rms_normalize(1e-6);
        let r = (12.5f64 + 1e-6).sqrt();
        assert!((y.value().data()[0] - 3.0 / r).abs() < 1e-12);
        assert!((y.value().data()[1] - 4.0 / r).abs() < 1e-12);
    }

    #[test]
    fn mean_axis_values() {
        let x = v(&[2, 2, 1], &[1.0, 3.0, 5.0, 9.0]);
        assert_eq!(x.mean_axis(1).unwrap().value().data(), &[2.0, 7.0]);
    }
}
