//! Two-stage Conv–BN–ReLU baseline.
//!
//! `[conv3×3 → BN → ReLU] ×2 → maxpool` at 64 then 128 channels, global
//! average pooling over the final 8×8 map, and a bias-free linear classifier.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Bound, ParamId, ParamStore};
use crate::optim::{label_smoothed_ce, AdamWConfig, Optimizer, Schedule};
use crate::tensor::{BatchNormState, Mode, Scalar, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct CnnConfig {
    pub in_channels: usize,
    /// Output width of each stage.
    pub widths: Vec<usize>,
    pub convs_per_stage: usize,
    pub num_classes: usize,
    pub init_seed: u64,
}

impl CnnConfig {
    /// Widths 64 and 128, two convolutions per stage, RGB input.
    pub fn cifar(num_classes: usize) -> Self {
        Self {
            in_channels: 3,
            widths: vec![64, 128],
            convs_per_stage: 2,
            num_classes,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.convs_per_stage == 0 || self.num_classes == 0 || self.in_channels == 0 {
            return Err(Error::Config("CNN needs at least one stage, conv, class and channel".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct ConvBlock {
    kernel: ParamId,
    gamma: ParamId,
    beta: ParamId,
}

/// One training step's loss and accuracy count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
    pub correct: usize,
}

#[derive(Clone, Debug)]
pub struct Cnn<T: Scalar = f32> {
    pub config: CnnConfig,
    pub params: ParamStore<T>,
    /// Running statistics, one per convolution. Not counted as parameters.
    pub bn_states: Vec<BatchNormState<T>>,
    blocks: Vec<ConvBlock>,
    head: ParamId,
}

impl<T: Scalar> Cnn<T> {
    /// Kernels use a He-scaled truncated normal; BN starts at `γ=1, β=0`.
    pub fn new(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamStore::new();
        let mut blocks = Vec::new();
        let mut bn_states = Vec::new();
        let mut cin = config.in_channels;
        for (s, &width) in config.widths.iter().enumerate() {
            for k in 0..config.convs_per_stage {
                let name = format!("stage{s}.conv{k}");
                let std = (2.0 / (9 * cin) as f64).sqrt();
                let kernel = params.add_truncated_normal(format!("{name}.kernel"), &[3, 3, cin, width], std, &mut rng);
                let gamma = params.add(format!("{name}.bn_gamma"), Tensor::ones(&[width]));
                let beta = params.add(format!("{name}.bn_beta"), Tensor::zeros(&[width]));
                blocks.push(ConvBlock { kernel, gamma, beta });
                bn_states.push(BatchNormState::new(width));
                cin = width;
            }
        }
        let std = (1.0 / cin as f64).sqrt();
        let head = params.add_truncated_normal("head.w_out", &[cin, config.num_classes], std, &mut rng);
        Ok(Self {
            config,
            params,
            bn_states,
            blocks,
            head,
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn optimizer(&self, adamw: AdamWConfig, schedule: Schedule, max_grad_norm: f64) -> Optimizer<T> {
        Optimizer::new(&self.params, adamw, schedule, max_grad_norm)
    }

    /// `[B,H,W,C]` to `[B,K]` logits. Train mode updates the running statistics.
    pub fn forward(&mut self, params: &Bound<T>, images: &Var<T>, mode: Mode) -> Result<Var<T>> {
        forward(&self.config, &self.blocks, self.head, &mut self.bn_states, params, images, mode)
    }

    pub fn train_batch(
        &mut self,
        images: &Tensor<T>,
        labels: &[usize],
        optimizer: &mut Optimizer<T>,
        smoothing: f64,
    ) -> Result<StepRecord> {
        let params = self.params.bind(true);
        let logits = self.forward(&params, &Var::constant(images.clone()), Mode::Train)?;
        let loss = label_smoothed_ce(&logits, labels, smoothing)?;
        let loss_value = loss.value().data()[0].f64();
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss_value}")));
        }
        let grads = params.grads(&loss.backward()?);
        let info = optimizer.step(&mut self.params, grads)?;
        Ok(StepRecord {
            loss: loss_value,
            lr: info.lr,
            grad_norm: info.grad_norm,
            correct: crate::hrm::count_correct(logits.value(), labels),
        })
    }

    /// Eval-mode logits; running statistics are read, not changed.
    pub fn logits(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        let params = self.params.bind(false);
        let mut states = self.bn_states.clone();
        let out = forward(
            &self.config,
            &self.blocks,
            self.head,
            &mut states,
            &params,
            &Var::constant(images.clone()),
            Mode::Eval,
        )?;
        Ok(out.value().clone())
    }
}

fn forward<T: Scalar>(
    config: &CnnConfig,
    blocks: &[ConvBlock],
    head: ParamId,
    states: &mut [BatchNormState<T>],
    params: &Bound<T>,
    images: &Var<T>,
    mode: Mode,
) -> Result<Var<T>> {
    let s = images.shape();
    let shrink = 1usize << config.widths.len();
    if s.len() != 4 || s[3] != config.in_channels || !s[1].is_multiple_of(shrink) || !s[2].is_multiple_of(shrink) || s[1] == 0 {
        return Err(Error::Config(format!(
            "CNN expects [B,H,W,{}] with H and W divisible by {shrink}, got {s:?}",
            config.in_channels
        )));
    }
    let mut x = images.clone();
    for (i, (block, state)) in blocks.iter().zip(states.iter_mut()).enumerate() {
        x = x
            .conv2d(&params[block.kernel])?
            .batch_norm2d(&params[block.gamma], &params[block.beta], state, mode)?
            .relu();
        if (i + 1) % config.convs_per_stage == 0 {
            x = x.maxpool2d()?;
        }
    }
    let (b, h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    x.reshape(&[b, h * w, c])?.mean_axis(1)?.matmul(&params[head])
}
