use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Adam with decoupled weight decay. Moments are kept in `T`.
#[derive(Clone, Debug)]
pub struct AdamW<T: Scalar = f32> {
    pub config: AdamWConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(params: &ParamStore<T>, config: AdamWConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `p ← p − lr·wd·p − lr·m̂/(√v̂ + eps)` for every parameter not in `skip`.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Tensor<T>], lr: f64, skip: &[bool]) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (i, (param, g)) in params.iter_mut().zip(grads).enumerate() {
            if skip.get(i).copied().unwrap_or(false) {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            if g.shape() != param.value.shape() || m.shape() != param.value.shape() {
                return Err(Error::Contract(format!(
                    "shape mismatch for '{}': parameter {:?}, gradient {:?}, moment {:?}",
                    param.name,
                    param.value.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
            let decay = 1.0 - lr * c.weight_decay;
            for (((p, g), m), v) in param
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gf = g.f64();
                let mf = c.beta1 * m.f64() + (1.0 - c.beta1) * gf;
                let vf = c.beta2 * v.f64() + (1.0 - c.beta2) * gf * gf;
                *m = T::of(mf);
                *v = T::of(vf);
                let update = (mf / bc1) / ((vf / bc2).sqrt() + c.eps);
                *p = T::of(p.f64() * decay - lr * update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("p", Tensor::from_f64(&[1], &[value]).unwrap());
        s
    }

    fn g(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::from_f64(&[1], &[v]).unwrap()]
    }

    #[test]
    fn first_step_matches_hand_value() {
        let mut s = single(1.0);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(&s, cfg);
        opt.step(&mut s, &g(0.5), 1e-3, &[]).unwrap();
        // m̂ = 0.5, v̂ = 0.25, so the step is lr·0.5/(0.5 + 1e-8).
        let want = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((s.iter().next().unwrap().value.data()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn ten_steps_match_scalar_adam() {
        let mut s = single(0.3);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(&s, cfg);
        let (mut p, mut m, mut v) = (0.3f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            let grad = (t as f64 * 0.7).sin();
            opt.step(&mut s, &g(grad), 1e-2, &[]).unwrap();
            m = 0.9 * m + 0.1 * grad;
            v = 0.999 * v + 0.001 * grad * grad;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p -= 1e-2 * mh / (vh.sqrt() + 1e-8);
            assert!((s.iter().next().unwrap().value.data()[0] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_grad_zero_decay_is_noop() {
        let mut s = single(2.0);
        let mut opt = AdamW::new(
            &s,
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
        );
        opt.step(&mut s, &g(0.0), 1e-2, &[]).unwrap();
        assert_eq!(s.iter().next().unwrap().value.data()[0], 2.0);
    }

    #[test]
    fn decoupled_decay_shrinks_geometrically() {
        let mut s = single(2.0);
        let mut opt = AdamW::new(&s, AdamWConfig::default());
        for _ in 0..3 {
            opt.step(&mut s, &g(0.0), 0.1, &[]).unwrap();
        }
        let want = 2.0 * (1.0f64 - 0.1 * 5e-4).powi(3);
        assert!((s.iter().next().unwrap().value.data()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let mut s = single(1.0);
        let mut opt = AdamW::new(&s, AdamWConfig::default());
        let bad = vec![Tensor::<f64>::zeros(&[2])];
        assert!(matches!(opt.step(&mut s, &bad, 0.1, &[]), Err(Error::Contract(_))));
    }
}
