//! Train the HRM on an MNIST subset and report accuracy.
//!
//! ```text
//! cargo run --release --example train_mnist -- [data_dir] [train_examples] [epochs]
//! ```
//!
//! The full protocol is `hrm train --model hrm --dataset mnist`.

use hrm_vision::data::DatasetKind;
use hrm_vision::experiment::{train, ModelKind, PreparedData, RunConfig};

fn main() -> hrm_vision::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig::defaults(ModelKind::Hrm, DatasetKind::Mnist);
    cfg.data_dir = args.first().map_or("data".into(), Into::into);
    cfg.train_limit = Some(args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2048));
    cfg.epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    cfg.test_limit = Some(512);
    cfg.log_every = 4;
    cfg.out_dir = "runs/example-hrm-mnist".into();
    let data = PreparedData::load(&cfg)?;
    let summary = train(&cfg, &data)?;
    for e in &summary.record.epochs {
        println!("epoch {} train loss {:.4} train acc {:.4} test acc {:.4}", e.epoch, e.train_loss, e.train_acc, e.test_acc.unwrap_or(f64::NAN));
    }
    println!("{} misclassified tiles in {}", summary.errors, summary.out_dir.join("errors.png").display());
    Ok(())
}
