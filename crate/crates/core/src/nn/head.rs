use rand::Rng;

use super::{Bound, ParamId, ParamStore, INIT_STD};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor, Var};

fn cls_channel<T: Scalar>(z: &Var<T>) -> Result<Var<T>> {
    if z.shape().len() != 3 || z.shape()[1] == 0 {
        return Err(Error::Config(format!("expected [B,S,D] with S >= 1, got {:?}", z.shape())));
    }
    z.select(1, 0)
}

/// Bias-free linear map from the CLS channel to class logits.
#[derive(Clone, Debug)]
pub struct OutputHead {
    pub num_classes: usize,
    /// `[D, K]`
    pub w_out: ParamId,
}

impl OutputHead {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        d_model: usize,
        num_classes: usize,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Self {
        let w_out = store.add_truncated_normal("head.w_out", &[d_model, num_classes], INIT_STD, rng);
        Self { num_classes, w_out }
    }

    /// `z_H[:,0,:] · W_out`, shape `[B,K]`.
    pub fn logits<T: Scalar>(&self, params: &Bound<T>, z_high: &Var<T>) -> Result<Var<T>> {
        cls_channel(z_high)?.matmul(&params[self.w_out])
    }
}

/// Argmax over classes, first index on ties.
pub fn classify<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    logits.argmax_last()
}

/// Halt/continue scores from the CLS channel: `σ(z_H[:,0,:] · W_q)`.
///
/// Column 0 is the halt score, column 1 the continue score. The head is
/// never trained here; it can only cap the number of evaluation segments.
#[derive(Clone, Debug)]
pub struct HaltingHead {
    /// `[D, 2]`
    pub w_q: ParamId,
}

impl HaltingHead {
    pub fn new<T: Scalar, R: Rng + ?Sized>(d_model: usize, store: &mut ParamStore<T>, rng: &mut R) -> Self {
        let w_q = store.add_truncated_normal("halting.w_q", &[d_model, 2], INIT_STD, rng);
        Self { w_q }
    }

    pub fn scores<T: Scalar>(&self, params: &Bound<T>, z_high: &Var<T>) -> Result<Var<T>> {
        Ok(cls_channel(z_high)?.matmul(&params[self.w_q])?.sigmoid())
    }
}
