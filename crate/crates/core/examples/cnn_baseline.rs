//! The convolutional baseline on CIFAR-10, or on synthetic colour images when
//! the dataset is not present.
//!
//! ```text
//! cargo run --release --example cnn_baseline -- [data_dir] [epochs]
//! ```

use hrm_vision::data::{Dataset, DatasetKind, Split};
use hrm_vision::experiment::{train, ModelKind, PreparedData, RunConfig};
use hrm_vision::tensor::Tensor;

// Class k is a vertical stripe at column 3k in channel k % 3.
fn stripes(n: usize, split: Split) -> Dataset {
    let labels: Vec<usize> = (0..n).map(|i| (i * 7) % 10).collect();
    let images = Tensor::from_fn(&[n, 32, 32, 3], |i| {
        let (img, px) = (i / 3072, i % 3072);
        let (col, ch) = ((px / 3) % 32, px % 3);
        let k = labels[img];
        let noise = ((i * 2654435761) % 1000) as f32 / 4000.0;
        if col / 3 == k && ch == k % 3 { 0.9 } else { noise }
    });
    Dataset::new(images, labels, 10, split).expect("consistent synthetic set")
}

fn main() -> hrm_vision::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig::defaults(ModelKind::Cnn, DatasetKind::Cifar10);
    cfg.data_dir = args.first().map_or("data".into(), Into::into);
    cfg.epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    cfg.out_dir = "runs/example-cnn".into();
    cfg.log_every = 0;
    let data = if DatasetKind::Cifar10.is_present(&cfg.data_dir) {
        PreparedData::load(&cfg)?
    } else {
        println!("CIFAR-10 not found under {}, using synthetic stripes", cfg.data_dir.display());
        cfg.train_limit = None;
        PreparedData::new(stripes(1024, Split::Train), stripes(256, Split::Test), &cfg)?
    };
    let summary = train(&cfg, &data)?;
    println!("{} parameters", summary.num_params);
    for (e, t) in summary.record.epochs.iter().zip(&summary.record.timing) {
        println!(
            "epoch {} loss {:.4} train acc {:.4} test acc {:.4} ({:.1}s)",
            e.epoch,
            e.train_loss,
            e.train_acc,
            e.test_acc.unwrap_or(f64::NAN),
            t.train_seconds
        );
    }
    Ok(())
}
