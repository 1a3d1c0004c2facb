//! Per-module parameter counts for the three published model sizes.
//!
//! ```text
//! cargo run --release --example param_audit
//! ```

use hrm_vision::cnn::{Cnn, CnnConfig};
use hrm_vision::hrm::{Hrm, HrmConfig};
use hrm_vision::nn::ParamStore;

fn by_prefix(store: &ParamStore<f32>) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for p in store.iter() {
        let prefix = p.name.split('.').next().unwrap_or("").to_string();
        match out.last_mut() {
            Some((name, n)) if *name == prefix => *n += p.value.len(),
            _ => out.push((prefix, p.value.len())),
        }
    }
    out
}

fn main() -> hrm_vision::Result<()> {
    for (label, cfg) in [
        ("HRM mnist", HrmConfig::mnist()),
        ("HRM cifar10", HrmConfig::cifar(10)),
        ("HRM cifar100", HrmConfig::cifar(100)),
    ] {
        let m = Hrm::<f32>::new(cfg)?;
        println!("{label}: {} trainable", m.num_params());
        for (prefix, n) in by_prefix(&m.params) {
            let note = if prefix == "halting" { "  (frozen, not counted)" } else { "" };
            println!("  {prefix:<10} {n:>9}{note}");
        }
    }
    for k in [10, 100] {
        let m = Cnn::<f32>::new(CnnConfig::cifar(k))?;
        println!("CNN cifar{k}: {}", m.num_params());
        for (prefix, n) in by_prefix(&m.params) {
            println!("  {prefix:<10} {n:>9}");
        }
    }
    Ok(())
}
