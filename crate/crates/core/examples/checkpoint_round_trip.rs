//! Save a model, load it back, and confirm identical predictions.
//!
//! ```text
//! cargo run --release --example checkpoint_round_trip
//! ```

use hrm_vision::data::DatasetKind;
use hrm_vision::experiment::{checkpoint, Model, ModelKind, RunConfig};
use hrm_vision::tensor::Tensor;

fn main() -> hrm_vision::Result<()> {
    let dir = std::env::temp_dir().join("hrm-checkpoint-example");
    let cfg = RunConfig::defaults(ModelKind::Hrm, DatasetKind::Mnist);
    let model = Model::build(&cfg)?;
    checkpoint::save(&dir, &cfg, 0, &model)?;
    let loaded = checkpoint::load(&dir)?;
    let images = Tensor::<f32>::from_fn(&[4, 28, 28, 1], |i| (i % 29) as f32 / 29.0);
    let (a, b) = (model.logits(&images, 0)?, loaded.model.logits(&images, 0)?);
    println!("wrote {}", checkpoint::manifest_path(&dir).display());
    println!("{} tensors, max logit difference {}", loaded.model.tensors().len(), a.max_abs_diff(&b));
    Ok(())
}
