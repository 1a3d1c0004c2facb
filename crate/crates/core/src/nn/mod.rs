//! Transformer building blocks and the parameter container they draw from.
//!
//! Modules never own tensors. They hold [`ParamId`]s into a [`ParamStore`];
//! a forward pass first [binds](ParamStore::bind) the store into tape
//! variables, either tracked (training) or constant (evaluation).

mod attention;
mod encoder;
mod ffn;
mod head;
mod norm;
mod rope;
mod tokenizer;

pub use attention::{mhsa, mhsa_with_probs, AttentionWeights};
pub use encoder::{encoder_block, EncoderConfig, EncoderLayer, EncoderStack, NormPlacement};
pub use ffn::geglu_ffn;
pub use head::{classify, HaltingHead, OutputHead};
pub use norm::{rmsnorm, RMS_EPS};
pub use rope::{rope_apply, ROPE_BASE};
pub use tokenizer::Tokenizer;

use std::ops::Index;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{truncated_normal_with, Gradients, Scalar, Tensor, Var};

/// Standard deviation of the truncated-normal projection initializer.
pub const INIT_STD: f64 = 0.02;

/// Position of a parameter in its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T: Scalar = f32> {
    pub name: String,
    pub value: Tensor<T>,
}

/// Ordered set of learnable tensors. Insertion order is the checkpoint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T: Scalar = f32> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a `std · TN(0,1;-2,2)` tensor.
    pub fn add_truncated_normal<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        std: f64,
        rng: &mut R,
    ) -> ParamId {
        let value = truncated_normal_with(rng, shape, std);
        self.add(name, value)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Copies every parameter into a tape variable.
    pub fn bind(&self, tracked: bool) -> Bound<T> {
        let vars = self
            .params
            .iter()
            .map(|p| {
                if tracked {
                    Var::leaf(p.value.clone())
                } else {
                    Var::constant(p.value.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                })
                .collect(),
        }
    }

    /// All values concatenated in store order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for p in &self.params {
            out.extend_from_slice(p.value.data());
        }
        out
    }

    /// Inverse of [`ParamStore::flatten`]; shapes are kept.
    pub fn load_flat(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.num_scalars() {
            return Err(Error::Contract(format!(
                "parameter blob has {} values, model needs {}",
                values.len(),
                self.num_scalars()
            )));
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// A [`ParamStore`] materialized as tape variables for one forward pass.
pub struct Bound<T: Scalar = f32> {
    vars: Vec<Var<T>>,
}

impl<T: Scalar> Bound<T> {
    /// Binds explicit variables, one per parameter in store order.
    pub fn from_vars(vars: Vec<Var<T>>) -> Self {
        Self { vars }
    }

    pub fn get(&self, id: ParamId) -> &Var<T> {
        &self.vars[id.0]
    }

    /// The same values with every tape link cut.
    pub fn detached(&self) -> Bound<T> {
        Bound {
            vars: self.vars.iter().map(Var::stop_gradient).collect(),
        }
    }

    /// Per-parameter gradients in store order; unreached parameters get zeros.
    pub fn grads(&self, grads: &Gradients<T>) -> Vec<Tensor<T>> {
        self.vars.iter().map(|v| grads.wrt(v)).collect()
    }
}

impl<T: Scalar> Index<ParamId> for Bound<T> {
    type Output = Var<T>;

    fn index(&self, id: ParamId) -> &Var<T> {
        self.get(id)
    }
}
