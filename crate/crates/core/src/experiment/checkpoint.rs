//! `checkpoint.txt` holds the format tag, epoch, run config and tensor
//! table; `checkpoint.bin` holds the tensors as little-endian `f32` in table
//! order.

use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::model::Model;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_TAG: &str = "hrm-vision-checkpoint-1";

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint.txt")
}

pub fn blob_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint.bin")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes both files into `dir`; each replaces its predecessor atomically.
pub fn save(dir: &Path, config: &RunConfig, epoch: usize, model: &Model) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tensors = model.tensors();
    let mut text = format!("format={FORMAT_TAG}\nepoch={epoch}\n[config]\n{}[tensors]\n", config.to_text());
    let mut blob = Vec::new();
    for (name, t) in &tensors {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        text.push_str(&format!("{name} {}\n", dims.join(",")));
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(&blob_path(dir), &blob)?;
    write_atomic(&manifest_path(dir), text.as_bytes())
}

/// A restored checkpoint.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub epoch: usize,
    pub model: Model,
}

pub fn load(dir: &Path) -> Result<Loaded> {
    let mpath = manifest_path(dir);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let bad = |m: String| Error::format(&mpath, m);
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == format!("format={FORMAT_TAG}") => {}
        other => return Err(bad(format!("expected format={FORMAT_TAG}, found {other:?}"))),
    }
    let epoch = lines
        .next()
        .and_then(|l| l.strip_prefix("epoch="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing epoch line".into()))?;
    if lines.next() != Some("[config]") {
        return Err(bad("missing [config] section".into()));
    }
    let mut config_text = String::new();
    for line in lines.by_ref() {
        if line == "[tensors]" {
            break;
        }
        config_text.push_str(line);
        config_text.push('\n');
    }
    let config = RunConfig::from_text(&config_text)?;
    let mut table = Vec::new();
    for line in lines {
        let (name, dims) = line
            .rsplit_once(' ')
            .ok_or_else(|| bad(format!("bad tensor line '{line}'")))?;
        let shape: Vec<usize> = if dims.is_empty() {
            Vec::new()
        } else {
            dims.split(',')
                .map(|d| d.parse().map_err(|_| bad(format!("bad dimension in '{line}'"))))
                .collect::<Result<_>>()?
        };
        table.push((name.to_string(), shape));
    }

    let bpath = blob_path(dir);
    let blob = std::fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    let needed: usize = table.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if blob.len() != needed * 4 {
        return Err(Error::format(
            &bpath,
            format!("{} bytes, manifest needs {}", blob.len(), needed * 4),
        ));
    }
    let mut values = blob.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let tensors = table
        .into_iter()
        .map(|(name, shape)| {
            let n = shape.iter().product();
            let data: Vec<f32> = values.by_ref().take(n).collect();
            Ok((name, Tensor::new(&shape, data)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = Model::build(&config)?;
    model.load_tensors(tensors)?;
    Ok(Loaded { config, epoch, model })
}
