use super::config::{ModelKind, RunConfig};
use crate::cnn::Cnn;
use crate::error::{Error, Result};
use crate::hrm::Hrm;
use crate::optim::{Optimizer, Schedule};
use crate::tensor::Tensor;

/// Either trainable model behind one interface.
#[derive(Clone, Debug)]
pub enum Model {
    Hrm(Hrm<f32>),
    Cnn(Cnn<f32>),
}

/// Outcome of one training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    /// `(segment, loss, lr)` per optimizer step.
    pub steps: Vec<(usize, f64, f64)>,
    /// Correct predictions from the final segment.
    pub correct: usize,
}

impl Model {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(match config.model {
            ModelKind::Hrm => Model::Hrm(Hrm::new(config.hrm_config())?),
            ModelKind::Cnn => Model::Cnn(Cnn::new(config.cnn_config())?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Hrm(_) => ModelKind::Hrm,
            Model::Cnn(_) => ModelKind::Cnn,
        }
    }

    /// Trainable scalars.
    pub fn num_params(&self) -> usize {
        match self {
            Model::Hrm(m) => m.num_params(),
            Model::Cnn(m) => m.num_params(),
        }
    }

    /// Parameters in store order, then any running statistics.
    pub fn tensors(&self) -> Vec<(String, &Tensor<f32>)> {
        match self {
            Model::Hrm(m) => m.params.iter().map(|p| (p.name.clone(), &p.value)).collect(),
            Model::Cnn(m) => {
                let mut out: Vec<(String, &Tensor<f32>)> =
                    m.params.iter().map(|p| (p.name.clone(), &p.value)).collect();
                for (i, s) in m.bn_states.iter().enumerate() {
                    out.push((format!("bn{i}.running_mean"), &s.running_mean));
                    out.push((format!("bn{i}.running_var"), &s.running_var));
                }
                out
            }
        }
    }

    /// Replaces every tensor; names, order and shapes must match [`Model::tensors`].
    pub fn load_tensors(&mut self, tensors: Vec<(String, Tensor<f32>)>) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != tensors.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} tensors, model has {}",
                tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), (got_name, got)) in expected.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != got.shape() {
                return Err(Error::Data(format!(
                    "checkpoint tensor '{got_name}' {:?} does not match '{name}' {shape:?}",
                    got.shape()
                )));
            }
        }
        let mut it = tensors.into_iter().map(|(_, t)| t);
        match self {
            Model::Hrm(m) => {
                for p in m.params.iter_mut() {
                    p.value = it.next().expect("length checked");
                }
            }
            Model::Cnn(m) => {
                for p in m.params.iter_mut() {
                    p.value = it.next().expect("length checked");
                }
                for s in &mut m.bn_states {
                    s.running_mean = it.next().expect("length checked");
                    s.running_var = it.next().expect("length checked");
                }
            }
        }
        Ok(())
    }

    /// Optimizer for `batches_per_epoch` over `config.epochs`, with the schedule measured in ticks.
    pub fn optimizer(&self, config: &RunConfig, batches_per_epoch: usize) -> Result<Optimizer<f32>> {
        let ticks = config.ticks_per_batch();
        let total = (config.epochs * batches_per_epoch * ticks).max(1);
        let warmup = (config.warmup_epochs * batches_per_epoch * ticks).min(total);
        let schedule = Schedule::new(config.lr, warmup, total, config.lr_floor)?;
        let mut opt = match self {
            Model::Hrm(m) => m.optimizer(config.adamw(), schedule, config.clip),
            Model::Cnn(m) => m.optimizer(config.adamw(), schedule, config.clip),
        };
        opt.steps_per_tick = config.steps_per_batch() / ticks;
        Ok(opt)
    }

    pub fn train_batch(
        &mut self,
        images: &Tensor<f32>,
        labels: &[usize],
        opt: &mut Optimizer<f32>,
        smoothing: f64,
    ) -> Result<BatchOutcome> {
        match self {
            Model::Hrm(m) => {
                let records = m.train_batch(images, labels, opt, smoothing)?;
                Ok(BatchOutcome {
                    steps: records.iter().map(|r| (r.segment, r.loss, r.lr)).collect(),
                    correct: records.last().map_or(0, |r| r.correct),
                })
            }
            Model::Cnn(m) => {
                let r = m.train_batch(images, labels, opt, smoothing)?;
                Ok(BatchOutcome {
                    steps: vec![(0, r.loss, r.lr)],
                    correct: r.correct,
                })
            }
        }
    }

    /// Eval-mode logits `[B,K]`. `batch_index` selects resampled HRM states.
    pub fn logits(&self, images: &Tensor<f32>, batch_index: u64) -> Result<Tensor<f32>> {
        match self {
            Model::Hrm(m) => Ok(m.evaluate(images, batch_index)?.logits),
            Model::Cnn(m) => m.logits(images),
        }
    }
}
