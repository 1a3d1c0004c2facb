//! Downloads the public dataset archives and unpacks them under a data root.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::data::{DatasetKind, Split};
use crate::error::{Error, Result};

const MNIST_BASE: &str = "https://ossci-datasets.s3.amazonaws.com/mnist/";
const CIFAR10_URL: &str = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz";
const CIFAR100_URL: &str = "https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz";

/// Exact byte length of every file a loader reads.
pub fn expected_len(kind: DatasetKind, file: &str) -> Option<u64> {
    Some(match (kind, file) {
        (DatasetKind::Mnist, "train-images-idx3-ubyte") => 16 + 60_000 * 784,
        (DatasetKind::Mnist, "train-labels-idx1-ubyte") => 8 + 60_000,
        (DatasetKind::Mnist, "t10k-images-idx3-ubyte") => 16 + 10_000 * 784,
        (DatasetKind::Mnist, "t10k-labels-idx1-ubyte") => 8 + 10_000,
        (DatasetKind::Cifar10, _) => 10_000 * 3073,
        (DatasetKind::Cifar100, "train.bin") => 50_000 * 3074,
        (DatasetKind::Cifar100, "test.bin") => 10_000 * 3074,
        _ => return None,
    })
}

fn get(url: &str) -> Result<impl Read> {
    let resp = ureq::get(url)
        .call()
        .map_err(|e| Error::Data(format!("download of {url} failed: {e}")))?;
    Ok(resp.into_body().into_reader())
}

/// Checks that every expected file exists with the right size.
pub fn verify(kind: DatasetKind, root: &Path) -> Result<()> {
    let dir = kind.dir(root);
    for file in [Split::Train, Split::Test].into_iter().flat_map(|s| kind.files(s)) {
        let path = dir.join(file);
        let len = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
        let want = expected_len(kind, file).expect("known file");
        if len != want {
            return Err(Error::format(&path, format!("{len} bytes, expected {want}")));
        }
    }
    Ok(())
}

/// Downloads `kind` into `root` unless it is already present and intact.
pub fn fetch(kind: DatasetKind, root: &Path) -> Result<()> {
    if verify(kind, root).is_ok() {
        return Ok(());
    }
    let dir = kind.dir(root);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    match kind {
        DatasetKind::Mnist => {
            for file in [Split::Train, Split::Test].into_iter().flat_map(|s| kind.files(s)) {
                let url = format!("{MNIST_BASE}{file}.gz");
                let mut bytes = Vec::new();
                GzDecoder::new(get(&url)?)
                    .read_to_end(&mut bytes)
                    .map_err(|e| Error::Data(format!("{url}: {e}")))?;
                let path = dir.join(file);
                std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            }
        }
        DatasetKind::Cifar10 | DatasetKind::Cifar100 => {
            let url = if kind == DatasetKind::Cifar10 { CIFAR10_URL } else { CIFAR100_URL };
            tar::Archive::new(GzDecoder::new(get(url)?))
                .unpack(root)
                .map_err(|e| Error::Data(format!("{url}: {e}")))?;
        }
    }
    verify(kind, root)
}
