use std::path::Path;

use super::{read_file, Dataset, DatasetKind, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const PIXELS: usize = 32 * 32 * 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CifarVariant {
    C10,
    /// Coarse and fine label bytes; the fine label is used.
    C100,
}

impl CifarVariant {
    pub fn label_bytes(self) -> usize {
        match self {
            Self::C10 => 1,
            Self::C100 => 2,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + PIXELS
    }

    pub fn num_classes(self) -> usize {
        match self {
            Self::C10 => 10,
            Self::C100 => 100,
        }
    }
}

/// Appends the records of one binary batch file. Pixels go from channel-major to `H×W×C`.
pub fn parse_cifar(bytes: &[u8], variant: CifarVariant, path: &Path, images: &mut Vec<f32>, labels: &mut Vec<usize>) -> Result<()> {
    let rec = variant.record_len();
    if !bytes.len().is_multiple_of(rec) {
        let offset = bytes.len() - bytes.len() % rec;
        return Err(Error::format(
            path,
            format!("truncated record at byte offset {offset} ({} trailing bytes, record is {rec})", bytes.len() - offset),
        ));
    }
    for (i, r) in bytes.chunks(rec).enumerate() {
        let label = r[variant.label_bytes() - 1] as usize;
        if label >= variant.num_classes() {
            return Err(Error::format(path, format!("label {label} at byte offset {}", i * rec)));
        }
        labels.push(label);
        let px = &r[variant.label_bytes()..];
        for p in 0..1024 {
            for c in 0..3 {
                images.push(px[c * 1024 + p] as f32 / 255.0);
            }
        }
    }
    Ok(())
}

pub fn load_cifar(dir: &Path, variant: CifarVariant, split: Split) -> Result<Dataset> {
    let kind = match variant {
        CifarVariant::C10 => DatasetKind::Cifar10,
        CifarVariant::C100 => DatasetKind::Cifar100,
    };
    let files = kind.files(split);
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    for f in files {
        let path = dir.join(f);
        parse_cifar(&read_file(&path)?, variant, &path, &mut images, &mut labels)?;
    }
    let n = labels.len();
    Dataset::new(Tensor::new(&[n, 32, 32, 3], images)?, labels, variant.num_classes(), split)
}
