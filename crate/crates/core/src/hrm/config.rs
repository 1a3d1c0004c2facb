use crate::error::{Error, Result};
use crate::nn::{EncoderConfig, NormPlacement};

/// How evaluation obtains its initial states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalStates {
    /// Reuse the fixed draw made at construction.
    Fixed,
    /// Draw new states for every evaluation batch from a seed-derived stream.
    Resample,
}

impl std::str::FromStr for EvalStates {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "resample" => Ok(Self::Resample),
            other => Err(Error::Config(format!("unknown eval state mode '{other}' (fixed|resample)"))),
        }
    }
}

impl std::fmt::Display for EvalStates {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::Resample => "resample",
        })
    }
}

/// Architecture and recurrence schedule of an [`Hrm`](super::Hrm).
#[derive(Clone, Debug, PartialEq)]
pub struct HrmConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub in_channels: usize,
    pub patch_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// `L_L`
    pub low_layers: usize,
    /// `L_H`
    pub high_layers: usize,
    pub mlp_mult: usize,
    pub norm: NormPlacement,
    /// `N`: high-level cycles per segment.
    pub n_cycles: usize,
    /// `T`: low-level updates per cycle.
    pub t_micro: usize,
    pub m_train: usize,
    pub m_eval: usize,
    pub num_classes: usize,
    /// Seeds the parameter initializer.
    pub init_seed: u64,
    /// Seeds the fixed initial states.
    pub state_seed: u64,
    pub eval_states: EvalStates,
    /// When set, evaluation stops refining an example once its halt score exceeds this.
    pub halt_threshold: Option<f64>,
}

impl HrmConfig {
    /// 28×28×1 digits, `D=128, H=4, L_L=L_H=2, P=4`: 1,053,056 parameters.
    pub fn mnist() -> Self {
        Self {
            image_height: 28,
            image_width: 28,
            in_channels: 1,
            patch_size: 4,
            d_model: 128,
            n_heads: 4,
            low_layers: 2,
            high_layers: 2,
            mlp_mult: 4,
            norm: NormPlacement::Post,
            n_cycles: 2,
            t_micro: 3,
            m_train: 2,
            m_eval: 3,
            num_classes: 10,
            init_seed: 0,
            state_seed: 1,
            eval_states: EvalStates::Fixed,
            halt_threshold: None,
        }
    }

    /// 32×32×3 images, `D=192, H=6`.
    pub fn cifar(num_classes: usize) -> Self {
        Self {
            image_height: 32,
            image_width: 32,
            in_channels: 3,
            d_model: 192,
            n_heads: 6,
            num_classes,
            ..Self::mnist()
        }
    }

    pub fn low_encoder(&self) -> EncoderConfig {
        self.encoder(self.low_layers)
    }

    pub fn high_encoder(&self) -> EncoderConfig {
        self.encoder(self.high_layers)
    }

    fn encoder(&self, n_layers: usize) -> EncoderConfig {
        EncoderConfig {
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_layers,
            mlp_mult: self.mlp_mult,
            norm: self.norm,
        }
    }

    /// Tokens per image, CLS included.
    pub fn seq_len(&self) -> usize {
        1 + (self.image_height / self.patch_size) * (self.image_width / self.patch_size)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_cycles", self.n_cycles),
            ("t_micro", self.t_micro),
            ("m_train", self.m_train),
            ("m_eval", self.m_eval),
            ("num_classes", self.num_classes),
            ("patch_size", self.patch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !self.image_height.is_multiple_of(self.patch_size) || !self.image_width.is_multiple_of(self.patch_size) {
            return Err(Error::Config(format!(
                "image {}x{} is not divisible into {p}x{p} patches",
                self.image_height,
                self.image_width,
                p = self.patch_size
            )));
        }
        self.low_encoder().validate()?;
        self.high_encoder().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        HrmConfig::mnist().validate().unwrap();
        HrmConfig::cifar(100).validate().unwrap();
        assert_eq!(HrmConfig::mnist().seq_len(), 50);
        assert_eq!(HrmConfig::cifar(10).seq_len(), 65);
    }

    #[test]
    fn zero_schedule_rejected() {
        let c = HrmConfig {
            t_micro: 0,
            ..HrmConfig::mnist()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
