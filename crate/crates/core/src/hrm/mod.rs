//! The two-timescale recurrence.
//!
//! A segment runs `N` cycles; each cycle makes `T` low-level updates
//! `z_L ← f_L(z_L + z_H + x̃)` and then one high-level update
//! `z_H ← f_H(z_H + z_L)`. Logits are read from the CLS row of the final
//! `z_H`. In training only the last low-level and the last high-level update
//! are on the tape; everything before them is evaluated with detached
//! weights and inputs. Segments chain through detached states, and training
//! takes one optimizer step per segment.

mod config;

pub use config::{EvalStates, HrmConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{classify, Bound, EncoderStack, HaltingHead, OutputHead, ParamId, ParamStore, Tokenizer};
use crate::optim::{label_smoothed_ce, AdamWConfig, Optimizer, Schedule};
use crate::tensor::{truncated_normal_with, Mode, Scalar, Tensor, Var};

/// Low- and high-level states, each `[B,S,D]`.
#[derive(Clone, Debug)]
pub struct HrmState<T: Scalar = f32> {
    pub z_low: Var<T>,
    pub z_high: Var<T>,
}

impl<T: Scalar> HrmState<T> {
    pub fn detach(&self) -> Self {
        Self {
            z_low: self.z_low.stop_gradient(),
            z_high: self.z_high.stop_gradient(),
        }
    }

    pub fn is_detached(&self) -> bool {
        !self.z_low.has_tape_link() && !self.z_high.has_tape_link()
    }

    pub fn shape(&self) -> &[usize] {
        self.z_low.shape()
    }
}

/// Result of one segment.
#[derive(Clone, Debug)]
pub struct SegmentOutput<T: Scalar = f32> {
    /// `[B,K]`, on the tape in training mode.
    pub logits: Var<T>,
    /// Detached copy of the final `(z_L, z_H)`.
    pub state: HrmState<T>,
    /// The final `z_H` before detaching; in training mode it is still on the tape.
    pub z_high: Var<T>,
    pub low_calls: usize,
    pub high_calls: usize,
}

/// Per-segment outcome of a training step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentRecord {
    pub segment: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
    pub correct: usize,
}

/// Final-segment logits and predictions of an evaluation pass.
#[derive(Clone, Debug)]
pub struct Evaluation<T: Scalar = f32> {
    pub logits: Tensor<T>,
    pub predictions: Vec<usize>,
    /// Segments each example ran before its prediction was fixed.
    pub segments_used: Vec<usize>,
}

/// A Hierarchical Reasoning Model with its parameters and fixed initial states.
#[derive(Clone, Debug)]
pub struct Hrm<T: Scalar = f32> {
    pub config: HrmConfig,
    pub params: ParamStore<T>,
    pub tokenizer: Tokenizer,
    pub low: EncoderStack,
    pub high: EncoderStack,
    pub head: OutputHead,
    pub halting: HaltingHead,
    z0_low: Tensor<T>,
    z0_high: Tensor<T>,
}

/// Two independent `[S,D]` draws from `TN(0,1;-2,2)` on separate streams of one seed.
pub fn initial_draw<T: Scalar>(seed: u64, seq_len: usize, d_model: usize) -> (Tensor<T>, Tensor<T>) {
    draw_pair(seed, 0, seq_len, d_model)
}

fn draw_pair<T: Scalar>(seed: u64, stream: u64, seq_len: usize, d_model: usize) -> (Tensor<T>, Tensor<T>) {
    let draw = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        truncated_normal_with(&mut rng, &[seq_len, d_model], 1.0)
    };
    (draw(stream), draw(stream + 1))
}

fn tile<T: Scalar>(row: &Tensor<T>, batch: usize) -> Var<T> {
    let mut data = Vec::with_capacity(batch * row.len());
    for _ in 0..batch {
        data.extend_from_slice(row.data());
    }
    let mut shape = vec![batch];
    shape.extend_from_slice(row.shape());
    Var::constant(Tensor::new(&shape, data).expect("tiled shape"))
}

impl<T: Scalar> Hrm<T> {
    /// Registers parameters in checkpoint order: tokenizer, `f_L`, `f_H`, head, halting head.
    pub fn new(config: HrmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamStore::new();
        let tokenizer = Tokenizer::new(config.patch_size, config.in_channels, config.d_model, &mut params, &mut rng)?;
        let low = EncoderStack::new(config.low_encoder(), &mut params, "low", &mut rng)?;
        let high = EncoderStack::new(config.high_encoder(), &mut params, "high", &mut rng)?;
        let head = OutputHead::new(config.d_model, config.num_classes, &mut params, &mut rng);
        let halting = HaltingHead::new(config.d_model, &mut params, &mut rng);
        let (z0_low, z0_high) = initial_draw(config.state_seed, config.seq_len(), config.d_model);
        Ok(Self {
            config,
            params,
            tokenizer,
            low,
            high,
            head,
            halting,
            z0_low,
            z0_high,
        })
    }

    /// Learnable scalars, halting head excluded.
    pub fn num_params(&self) -> usize {
        self.params.num_scalars() - self.params.get(self.halting.w_q).len()
    }

    /// Parameters that training never updates.
    pub fn frozen_params(&self) -> Vec<ParamId> {
        vec![self.halting.w_q]
    }

    /// An optimizer over this model with the halting head frozen.
    pub fn optimizer(&self, adamw: AdamWConfig, schedule: Schedule, max_grad_norm: f64) -> Optimizer<T> {
        let mut opt = Optimizer::new(&self.params, adamw, schedule, max_grad_norm);
        for id in self.frozen_params() {
            opt.freeze(id);
        }
        opt
    }

    /// The fixed `[S,D]` initial states.
    pub fn initial_draw(&self) -> (&Tensor<T>, &Tensor<T>) {
        (&self.z0_low, &self.z0_high)
    }

    /// The fixed draw repeated over `batch` rows.
    pub fn initial_state(&self, batch: usize) -> HrmState<T> {
        HrmState {
            z_low: tile(&self.z0_low, batch),
            z_high: tile(&self.z0_high, batch),
        }
    }

    /// Initial states for evaluation batch `batch_index`, per [`EvalStates`].
    pub fn eval_state(&self, batch: usize, batch_index: u64) -> HrmState<T> {
        match self.config.eval_states {
            EvalStates::Fixed => self.initial_state(batch),
            EvalStates::Resample => {
                let (zl, zh) = draw_pair(
                    self.config.state_seed,
                    2 + 2 * batch_index,
                    self.config.seq_len(),
                    self.config.d_model,
                );
                HrmState {
                    z_low: tile(&zl, batch),
                    z_high: tile(&zh, batch),
                }
            }
        }
    }

    /// `[B,H,W,C]` images to `[B,S,D]` tokens `x̃`.
    pub fn tokens(&self, params: &Bound<T>, images: &Tensor<T>) -> Result<Var<T>> {
        let c = &self.config;
        let shape = images.shape();
        if shape.len() != 4 || shape[1..] != [c.image_height, c.image_width, c.in_channels] {
            return Err(Error::Config(format!(
                "model expects [B,{},{},{}] images, got {shape:?}",
                c.image_height, c.image_width, c.in_channels
            )));
        }
        self.tokenizer.forward(params, &Var::constant(images.clone()))
    }

    /// `f_L(z_L + z_H + x̃)`
    pub fn low_step(&self, params: &Bound<T>, state: &HrmState<T>, x: &Var<T>) -> Result<Var<T>> {
        if state.z_low.shape() != x.shape() || state.z_high.shape() != x.shape() {
            return Err(Error::Config(format!(
                "state {:?}/{:?} and tokens {:?} disagree",
                state.z_low.shape(),
                state.z_high.shape(),
                x.shape()
            )));
        }
        self.low.forward(params, &state.z_low.add(&state.z_high)?.add(x)?)
    }

    /// `f_H(z_H + z_L)`
    pub fn high_step(&self, params: &Bound<T>, state: &HrmState<T>) -> Result<Var<T>> {
        self.high.forward(params, &state.z_high.add(&state.z_low)?)
    }

    /// One segment from a detached `state`.
    ///
    /// In [`Mode::Train`] every update but the last low-level and the last
    /// high-level one runs on detached weights and inputs, so the tape holds
    /// only those two updates plus the tokenizer and head.
    pub fn run_segment(&self, params: &Bound<T>, x: &Var<T>, state: &HrmState<T>, mode: Mode) -> Result<SegmentOutput<T>> {
        if !state.is_detached() {
            return Err(Error::Contract("segment entered with a state still on the tape".into()));
        }
        let (n, t) = (self.config.n_cycles, self.config.t_micro);
        let detached_params = params.detached();
        let x_const = x.stop_gradient();
        let mut s = state.clone();
        let (mut low_calls, mut high_calls) = (0, 0);
        for i in 0..n {
            for tau in 0..t {
                let last = mode == Mode::Train && i == n - 1 && tau == t - 1;
                s.z_low = if last {
                    self.low_step(params, &s, x)?
                } else {
                    self.low_step(&detached_params, &s, &x_const)?
                };
                low_calls += 1;
            }
            let last = mode == Mode::Train && i == n - 1;
            s.z_high = if last {
                self.high_step(params, &s)?
            } else {
                self.high_step(&detached_params, &s)?
            };
            high_calls += 1;
        }
        let head_params = if mode == Mode::Train { params } else { &detached_params };
        let logits = self.head.logits(head_params, &s.z_high)?;
        Ok(SegmentOutput {
            logits,
            state: s.detach(),
            z_high: s.z_high,
            low_calls,
            high_calls,
        })
    }

    /// One batch of deep supervision: `m_train` segments, each followed by an optimizer step.
    ///
    /// States start from the fixed draw and carry over, detached, between segments.
    pub fn train_batch(
        &mut self,
        images: &Tensor<T>,
        labels: &[usize],
        optimizer: &mut Optimizer<T>,
        smoothing: f64,
    ) -> Result<Vec<SegmentRecord>> {
        let batch = images.shape().first().copied().unwrap_or(0);
        if batch != labels.len() {
            return Err(Error::Data(format!("{batch} images but {} labels", labels.len())));
        }
        let mut state = self.initial_state(batch);
        let mut records = Vec::with_capacity(self.config.m_train);
        for segment in 0..self.config.m_train {
            let params = self.params.bind(true);
            let x = self.tokens(&params, images)?;
            let out = self.run_segment(&params, &x, &state, Mode::Train)?;
            let loss = label_smoothed_ce(&out.logits, labels, smoothing)?;
            let loss_value = loss.value().data()[0].f64();
            if !loss_value.is_finite() {
                return Err(Error::Numeric(format!("segment {segment} loss is {loss_value}")));
            }
            let grads = params.grads(&loss.backward()?);
            let info = optimizer.step(&mut self.params, grads)?;
            let correct = count_correct(out.logits.value(), labels);
            records.push(SegmentRecord {
                segment,
                loss: loss_value,
                lr: info.lr,
                grad_norm: info.grad_norm,
                correct,
            });
            state = out.state;
        }
        Ok(records)
    }

    /// `m_eval` chained segments without a tape; predictions from the last one.
    ///
    /// With a halting threshold, an example's prediction is fixed after the
    /// first segment whose halt score exceeds it.
    pub fn evaluate(&self, images: &Tensor<T>, batch_index: u64) -> Result<Evaluation<T>> {
        let params = self.params.bind(false);
        let x = self.tokens(&params, images)?;
        let batch = x.shape()[0];
        let k = self.config.num_classes;
        let mut state = self.eval_state(batch, batch_index);
        let mut logits = Tensor::zeros(&[batch, k]);
        let mut used = vec![0usize; batch];
        let mut halted = vec![false; batch];
        for m in 0..self.config.m_eval {
            let out = self.run_segment(&params, &x, &state, Mode::Eval)?;
            let q = match self.config.halt_threshold {
                Some(_) => Some(self.halting.scores(&params, &out.z_high)?),
                None => None,
            };
            for b in 0..batch {
                if halted[b] {
                    continue;
                }
                logits.data_mut()[b * k..(b + 1) * k].copy_from_slice(&out.logits.value().data()[b * k..(b + 1) * k]);
                used[b] = m + 1;
                if let (Some(q), Some(threshold)) = (&q, self.config.halt_threshold) {
                    halted[b] = q.value().data()[2 * b].f64() > threshold;
                }
            }
            state = out.state;
            if halted.iter().all(|h| *h) {
                break;
            }
        }
        Ok(Evaluation {
            predictions: classify(&logits),
            logits,
            segments_used: used,
        })
    }
}

/// Number of rows whose argmax equals the label.
pub fn count_correct<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    classify(logits).iter().zip(labels).filter(|(p, y)| p == y).count()
}
