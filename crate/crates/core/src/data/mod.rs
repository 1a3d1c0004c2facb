//! Dataset loaders, standardization and batching.
//!
//! Images are stored as `[N,H,W,C]` floats in `[0,1]` until standardized.
//! Nothing here augments data.

mod batches;
mod cifar;
mod mnist;
mod standardize;

pub use batches::{batch_order, Batch, Batches};
pub use cifar::{load_cifar, parse_cifar, CifarVariant};
pub use mnist::{load_mnist, load_mnist_idx, parse_idx_images, parse_idx_labels};
pub use standardize::{Standardizer, STD_FLOOR};

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Cifar100,
}

impl DatasetKind {
    pub fn num_classes(self) -> usize {
        match self {
            Self::Mnist | Self::Cifar10 => 10,
            Self::Cifar100 => 100,
        }
    }

    /// `(height, width, channels)`
    pub fn image_shape(self) -> (usize, usize, usize) {
        match self {
            Self::Mnist => (28, 28, 1),
            Self::Cifar10 | Self::Cifar100 => (32, 32, 3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::Cifar10 => "cifar10",
            Self::Cifar100 => "cifar100",
        }
    }

    /// Directory under a data root that holds this dataset's files.
    pub fn subdir(self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::Cifar10 => "cifar-10-batches-bin",
            Self::Cifar100 => "cifar-100-binary",
        }
    }

    /// File names of `split`, relative to [`DatasetKind::subdir`].
    pub fn files(self, split: Split) -> Vec<&'static str> {
        match (self, split) {
            (Self::Mnist, Split::Train) => vec!["train-images-idx3-ubyte", "train-labels-idx1-ubyte"],
            (Self::Mnist, Split::Test) => vec!["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"],
            (Self::Cifar10, Split::Train) => vec![
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            (Self::Cifar10, Split::Test) => vec!["test_batch.bin"],
            (Self::Cifar100, Split::Train) => vec!["train.bin"],
            (Self::Cifar100, Split::Test) => vec!["test.bin"],
        }
    }

    pub fn dir(self, root: &Path) -> PathBuf {
        root.join(self.subdir())
    }

    /// Paths that [`DatasetKind::load`] will read, for error messages.
    pub fn expected_paths(self, root: &Path) -> Vec<PathBuf> {
        let dir = self.dir(root);
        [Split::Train, Split::Test]
            .into_iter()
            .flat_map(|s| self.files(s))
            .map(|f| dir.join(f))
            .collect()
    }

    pub fn is_present(self, root: &Path) -> bool {
        self.expected_paths(root).iter().all(|p| p.is_file())
    }

    /// Loads one split from `root/<subdir>`, failing with the list of expected files.
    pub fn load(self, root: &Path, split: Split) -> Result<Dataset> {
        let dir = self.dir(root);
        let missing: Vec<String> = self
            .files(split)
            .iter()
            .map(|f| dir.join(f))
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "{} files not found: {}. Run `hrm fetch --dataset {} --data-dir {}` or place them there.",
                self.name(),
                missing.join(", "),
                self.name(),
                root.display()
            )));
        }
        match self {
            Self::Mnist => load_mnist(&dir, split),
            Self::Cifar10 => load_cifar(&dir, CifarVariant::C10, split),
            Self::Cifar100 => load_cifar(&dir, CifarVariant::C100, split),
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(Self::Mnist),
            "cifar10" => Ok(Self::Cifar10),
            "cifar100" => Ok(Self::Cifar100),
            other => Err(Error::Config(format!("unknown dataset '{other}' (mnist|cifar10|cifar100)"))),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Images `[N,H,W,C]` with one label per image.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(images: Tensor<f32>, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        if images.ndim() != 4 || images.shape()[0] != labels.len() {
            return Err(Error::Data(format!(
                "{} labels for images of shape {:?}",
                labels.len(),
                images.shape()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Data(format!("label {bad} outside [0, {num_classes})")));
        }
        Ok(Self {
            images,
            labels,
            num_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(height, width, channels)`
    pub fn image_shape(&self) -> (usize, usize, usize) {
        let s = self.images.shape();
        (s[1], s[2], s[3])
    }

    fn image_len(&self) -> usize {
        let (h, w, c) = self.image_shape();
        h * w * c
    }

    pub fn image(&self, index: usize) -> &[f32] {
        let n = self.image_len();
        &self.images.data()[index * n..(index + 1) * n]
    }

    /// Copies the listed examples, in order, into one batch.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let n = self.image_len();
        let (h, w, c) = self.image_shape();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        Batch {
            images: Tensor::new(&[indices.len(), h, w, c], data).expect("gathered shape"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            indices: indices.to_vec(),
        }
    }

    /// The first `n` examples.
    pub fn take(&self, n: usize) -> Dataset {
        let b = self.gather(&(0..n.min(self.len())).collect::<Vec<_>>());
        Dataset {
            images: b.images,
            labels: b.labels,
            num_classes: self.num_classes,
            split: self.split,
        }
    }

    /// Batches of `batch_size`, shuffled by `seed + epoch` when `shuffle` is set.
    pub fn batches(&self, batch_size: usize, seed: u64, epoch: usize, shuffle: bool) -> Batches<'_> {
        Batches::new(self, batch_order(self.len(), batch_size, seed, epoch, shuffle))
    }

    pub fn num_batches(&self, batch_size: usize) -> usize {
        self.len().div_ceil(batch_size.max(1))
    }
}

/// Fills `path`'s contents or reports an I/O error naming it.
pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
