//! The warmup, cosine and floor learning-rate curve of the default MNIST run.
//!
//! ```text
//! cargo run --release --example lr_schedule
//! ```

use hrm_vision::data::DatasetKind;
use hrm_vision::experiment::{Model, ModelKind, RunConfig, ScheduleUnit};
use hrm_vision::optim::lr_at;

fn main() -> hrm_vision::Result<()> {
    for unit in [ScheduleUnit::Segment, ScheduleUnit::Batch] {
        let mut cfg = RunConfig::defaults(ModelKind::Hrm, DatasetKind::Mnist);
        cfg.schedule_unit = unit;
        let batches = 469;
        let opt = Model::build(&cfg)?.optimizer(&cfg, batches)?;
        let s = opt.schedule;
        println!(
            "unit={unit}: {} ticks, {} warmup, {} optimizer steps per tick",
            s.total_steps, s.warmup_steps, opt.steps_per_tick
        );
        for tick in [0, s.warmup_steps / 2, s.warmup_steps - 1, s.warmup_steps, (s.warmup_steps + s.total_steps) / 2, s.total_steps - 1] {
            println!("  tick {tick:>5}  lr {:.3e}", lr_at(tick, &s)?);
        }
    }
    Ok(())
}
