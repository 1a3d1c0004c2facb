use std::str::FromStr;

use rand::Rng;

use super::attention::{mhsa, AttentionWeights};
use super::ffn::geglu_ffn;
use super::norm::rmsnorm;
use super::{Bound, ParamId, ParamStore, INIT_STD};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor, Var};

/// Where the two RMSNorms of a block sit relative to the residual adds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormPlacement {
    /// `x + f(norm(x))`
    Pre,
    /// `norm(x + f(x))`
    Post,
}

impl FromStr for NormPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(Self::Pre),
            "post" => Ok(Self::Post),
            other => Err(Error::Config(format!("unknown norm placement '{other}' (pre|post)"))),
        }
    }
}

impl std::fmt::Display for NormPlacement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pre => "pre",
            Self::Post => "post",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub mlp_mult: usize,
    pub norm: NormPlacement,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !self.head_dim().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "head dimension {} must be even for rotary pairing",
                self.head_dim()
            )));
        }
        if self.mlp_mult == 0 {
            return Err(Error::Config("mlp_mult must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn hidden(&self) -> usize {
        self.mlp_mult * self.d_model
    }

    /// Learnable scalars per layer: four `D×D` projections, three GEGLU
    /// matrices and two gain vectors (`16·D² + 2·D` at multiplier 4).
    pub fn params_per_layer(&self) -> usize {
        let d = self.d_model;
        4 * d * d + 3 * d * self.hidden() + 2 * d
    }
}

/// Parameter handles of one encoder block.
#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub attn_norm: ParamId,
    pub w_a: ParamId,
    pub w_b: ParamId,
    pub w_out: ParamId,
    pub ffn_norm: ParamId,
}

impl EncoderLayer {
    /// Registers the layer's parameters in checkpoint order.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        cfg: &EncoderConfig,
        store: &mut ParamStore<T>,
        prefix: &str,
        rng: &mut R,
    ) -> Self {
        let (d, h) = (cfg.d_model, cfg.hidden());
        let mut proj = |name: &str, shape: &[usize]| {
            store.add_truncated_normal(format!("{prefix}.{name}"), shape, INIT_STD, rng)
        };
        let wq = proj("wq", &[d, d]);
        let wk = proj("wk", &[d, d]);
        let wv = proj("wv", &[d, d]);
        let wo = proj("wo", &[d, d]);
        let w_a = proj("w_a", &[d, h]);
        let w_b = proj("w_b", &[d, h]);
        let w_out = proj("w_out", &[h, d]);
        let attn_norm = store.add(format!("{prefix}.attn_norm"), Tensor::ones(&[d]));
        let ffn_norm = store.add(format!("{prefix}.ffn_norm"), Tensor::ones(&[d]));
        Self {
            wq,
            wk,
            wv,
            wo,
            attn_norm,
            w_a,
            w_b,
            w_out,
            ffn_norm,
        }
    }

    pub fn param_ids(&self) -> [ParamId; 9] {
        [
            self.wq,
            self.wk,
            self.wv,
            self.wo,
            self.attn_norm,
            self.w_a,
            self.w_b,
            self.w_out,
            self.ffn_norm,
        ]
    }
}

/// One block: attention then GEGLU, each wrapped in RMSNorm and a residual add.
pub fn encoder_block<T: Scalar>(
    x: &Var<T>,
    layer: &EncoderLayer,
    params: &Bound<T>,
    cfg: &EncoderConfig,
) -> Result<Var<T>> {
    let attn = AttentionWeights {
        wq: &params[layer.wq],
        wk: &params[layer.wk],
        wv: &params[layer.wv],
        wo: &params[layer.wo],
    };
    let ffn = |h: &Var<T>| geglu_ffn(h, &params[layer.w_a], &params[layer.w_b], &params[layer.w_out]);
    match cfg.norm {
        NormPlacement::Pre => {
            let h = x.add(&mhsa(&rmsnorm(x, &params[layer.attn_norm])?, &attn, cfg.n_heads)?)?;
            h.add(&ffn(&rmsnorm(&h, &params[layer.ffn_norm])?)?)
        }
        NormPlacement::Post => {
            let h = rmsnorm(&x.add(&mhsa(x, &attn, cfg.n_heads)?)?, &params[layer.attn_norm])?;
            rmsnorm(&h.add(&ffn(&h)?)?, &params[layer.ffn_norm])
        }
    }
}

/// A Transformer encoder: `n_layers` blocks applied in sequence.
#[derive(Clone, Debug)]
pub struct EncoderStack {
    pub config: EncoderConfig,
    pub layers: Vec<EncoderLayer>,
}

impl EncoderStack {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        config: EncoderConfig,
        store: &mut ParamStore<T>,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let layers = (0..config.n_layers)
            .map(|i| EncoderLayer::new(&config, store, &format!("{prefix}.layer{i}"), rng))
            .collect();
        Ok(Self { config, layers })
    }

    pub fn forward<T: Scalar>(&self, params: &Bound<T>, x: &Var<T>) -> Result<Var<T>> {
        let d = self.config.d_model;
        if x.shape().len() != 3 || x.shape()[2] != d {
            return Err(Error::Config(format!(
                "encoder expects [B,S,{d}], got {:?}",
                x.shape()
            )));
        }
        let mut h = x.clone();
        for layer in &self.layers {
            h = encoder_block(&h, layer, params, &self.config)?;
        }
        Ok(h)
    }

    pub fn num_params(&self) -> usize {
        self.layers.len() * self.config.params_per_layer()
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| l.param_ids())
    }
}
