//! AdamW, global-norm clipping, the warmup/cosine-floor schedule and
//! label-smoothed cross-entropy.

mod adamw;
mod clip;
mod loss;
mod schedule;

pub use adamw::{AdamW, AdamWConfig};
pub use clip::clip_global_norm;
pub use loss::label_smoothed_ce;
pub use schedule::{lr_at, Schedule};

use crate::error::Result;
use crate::nn::{ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Learning rate and pre-clip gradient norm of one applied step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub lr: f64,
    pub grad_norm: f64,
}

/// Clip, schedule and AdamW bundled into one `step` per segment or batch.
#[derive(Clone, Debug)]
pub struct Optimizer<T: Scalar = f32> {
    pub adamw: AdamW<T>,
    pub schedule: Schedule,
    pub max_grad_norm: f64,
    /// Optimizer steps that share one schedule position.
    pub steps_per_tick: usize,
    frozen: Vec<bool>,
    step: usize,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(params: &ParamStore<T>, config: AdamWConfig, schedule: Schedule, max_grad_norm: f64) -> Self {
        Self {
            adamw: AdamW::new(params, config),
            schedule,
            max_grad_norm,
            steps_per_tick: 1,
            frozen: vec![false; params.len()],
            step: 0,
        }
    }

    /// Excludes a parameter from clipping, decay and updates.
    pub fn freeze(&mut self, id: ParamId) {
        self.frozen[id.index()] = true;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.index()]
    }

    /// Steps taken so far; also the schedule position of the next step.
    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, mut grads: Vec<Tensor<T>>) -> Result<StepInfo> {
        let lr = lr_at(self.step / self.steps_per_tick.max(1), &self.schedule)?;
        for (g, frozen) in grads.iter_mut().zip(&self.frozen) {
            if *frozen {
                *g = Tensor::zeros(g.shape());
            }
        }
        let names: Vec<&str> = params.ids().map(|id| params.name(id)).collect();
        let grad_norm = clip_global_norm(&mut grads, self.max_grad_norm, &names)?;
        self.adamw.step(params, &grads, lr, &self.frozen)?;
        let info = StepInfo {
            step: self.step,
            lr,
            grad_norm,
        };
        self.step += 1;
        Ok(info)
    }
}
