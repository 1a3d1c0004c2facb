use std::path::Path;

use super::{read_file, Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

fn be_u32(bytes: &[u8], at: usize, path: &Path, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, format!("file ends before header field '{field}'")))
}

/// Decodes an IDX3 image file into `[N,rows,cols,1]` floats in `[0,1]`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Tensor<f32>> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(path, format!("magic is {magic}, expected {IMAGE_MAGIC}")));
    }
    let n = be_u32(bytes, 4, path, "count")? as usize;
    let rows = be_u32(bytes, 8, path, "rows")? as usize;
    let cols = be_u32(bytes, 12, path, "cols")? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(Error::format(
            path,
            format!(
                "count {n} x {rows}x{cols} needs {} pixel bytes, found {}",
                n * rows * cols,
                body.len()
            ),
        ));
    }
    let data = body.iter().map(|&b| b as f32 / 255.0).collect();
    Tensor::new(&[n, rows, cols, 1], data)
}

/// Decodes an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(path, format!("magic is {magic}, expected {LABEL_MAGIC}")));
    }
    let n = be_u32(bytes, 4, path, "count")? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(path, format!("count {n} but {} label bytes", body.len())));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let images = parse_idx_images(&read_file(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read_file(labels_path)?, labels_path)?;
    if images.shape()[0] != labels.len() {
        return Err(Error::format(
            labels_path,
            format!("count {} does not match {} images", labels.len(), images.shape()[0]),
        ));
    }
    Dataset::new(images, labels, 10, split)
}

/// Reads the standard file names from `dir`.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let (img, lbl) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    load_mnist_idx(&dir.join(img), &dir.join(lbl), split)
}
