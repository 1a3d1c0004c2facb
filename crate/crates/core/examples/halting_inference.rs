//! Evaluation with and without the (untrained) halting head as a cap.
//!
//! ```text
//! cargo run --release --example halting_inference
//! ```

use hrm_vision::hrm::{Hrm, HrmConfig};
use hrm_vision::tensor::Tensor;

fn main() -> hrm_vision::Result<()> {
    let images = Tensor::<f32>::from_fn(&[6, 28, 28, 1], |i| ((i * 7919) % 255) as f32 / 255.0 - 0.5);
    for threshold in [None, Some(1.0), Some(0.5), Some(0.0)] {
        let model = Hrm::<f32>::new(HrmConfig {
            halt_threshold: threshold,
            ..HrmConfig::mnist()
        })?;
        let eval = model.evaluate(&images, 0)?;
        println!(
            "threshold {:<9} segments used {:?} predictions {:?}",
            threshold.map_or("none".to_string(), |t| t.to_string()),
            eval.segments_used,
            eval.predictions
        );
    }
    Ok(())
}
