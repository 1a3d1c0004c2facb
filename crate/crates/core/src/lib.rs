//! Hierarchical Reasoning Model (HRM) for image classification.
//!
//! Two Transformer encoders run at different time scales over a patch
//! tokenization of the image: a fast low-level module `f_L` and a slow
//! high-level module `f_H`. Training backpropagates only through the last
//! low- and high-level update of each segment and takes an optimizer step per
//! segment (deep supervision). A small Conv–BN–ReLU network serves as the
//! baseline.
//!
//! Modules, bottom-up:
//! - [`tensor`]: tensors, the gradient tape, numeric kernels
//! - [`nn`]: parameters, RMSNorm, rotary attention, GEGLU, encoders, tokenizer, heads
//! - [`hrm`]: the two-timescale recurrence, one-step gradient segments, deep supervision
//! - [`cnn`]: the convolutional baseline
//! - [`optim`]: AdamW, clipping, warmup/cosine schedule, label-smoothed cross-entropy
//! - [`data`]: MNIST / CIFAR loaders, standardization, batching
//! - [`experiment`]: run configuration, training driver, metrics, plots, checkpoints

pub mod cnn;
pub mod data;
pub mod experiment;
pub mod error;
pub mod hrm;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
