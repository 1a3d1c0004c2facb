use crate::error::{Error, Result};

/// Linear warmup to `peak_lr`, then cosine decay down to `floor_fraction · peak_lr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub floor_fraction: f64,
}

impl Schedule {
    pub fn new(peak_lr: f64, warmup_steps: usize, total_steps: usize, floor_fraction: f64) -> Result<Self> {
        let s = Self {
            peak_lr,
            warmup_steps,
            total_steps,
            floor_fraction,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor_fraction > 0.0 && self.floor_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "floor fraction {} outside (0, 1]",
                self.floor_fraction
            )));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::Config(format!(
                "warmup {} exceeds total steps {}",
                self.warmup_steps, self.total_steps
            )));
        }
        Ok(())
    }

    pub fn floor(&self) -> f64 {
        self.floor_fraction * self.peak_lr
    }
}

/// Learning rate for 0-based `step`.
pub fn lr_at(step: usize, s: &Schedule) -> Result<f64> {
    if step >= s.total_steps {
        return Err(Error::Contract(format!(
            "step {step} outside schedule of {} steps",
            s.total_steps
        )));
    }
    if step < s.warmup_steps {
        return Ok(s.peak_lr * (step + 1) as f64 / s.warmup_steps as f64);
    }
    let decay = s.total_steps - s.warmup_steps;
    // A schedule that is all warmup ends exactly at the peak.
    let progress = if decay <= 1 {
        0.0
    } else {
        (step - s.warmup_steps) as f64 / (decay - 1) as f64
    };
    let floor = s.floor();
    Ok(floor + (s.peak_lr - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> Schedule {
        Schedule::new(3e-4, 100, 1101, 0.2).unwrap()
    }

    #[test]
    fn endpoints() {
        let s = sched();
        assert!((lr_at(0, &s).unwrap() - 3e-6).abs() < 1e-15);
        assert!((lr_at(99, &s).unwrap() - 3e-4).abs() < 1e-15);
        assert!((lr_at(100, &s).unwrap() - 3e-4).abs() < 1e-12);
        assert!((lr_at(1100, &s).unwrap() - 6e-5).abs() < 1e-15);
        assert!((lr_at(600, &s).unwrap() - 1.8e-4).abs() < 1e-12);
    }

    #[test]
    fn never_below_floor_after_warmup() {
        let s = sched();
        for step in 100..1101 {
            assert!(lr_at(step, &s).unwrap() >= 6e-5 - 1e-18);
        }
    }

    #[test]
    fn out_of_range_is_contract_error() {
        assert!(matches!(lr_at(1101, &sched()), Err(Error::Contract(_))));
    }

    #[test]
    fn bad_floor_rejected() {
        assert!(Schedule::new(1.0, 0, 10, 0.0).is_err());
        assert!(Schedule::new(1.0, 11, 10, 0.5).is_err());
    }
}
