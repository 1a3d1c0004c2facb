use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRow {
    pub step: usize,
    pub segment: usize,
    pub loss: f64,
    pub lr: f64,
}

/// One epoch. Train accuracy comes from the final segment's logits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingRow {
    pub epoch: usize,
    pub train_seconds: f64,
    pub eval_seconds: f64,
    pub steps: usize,
}

/// Per-step and per-epoch history of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainRecord {
    pub steps: Vec<StepRow>,
    pub epochs: Vec<EpochRow>,
    pub timing: Vec<TimingRow>,
}

/// Trailing mean over `window` points; the first `window − 1` use what is available.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Contract("moving average window must be at least 1".into()));
    }
    // Summed per window rather than as a running total, so no drift accumulates.
    Ok((0..series.len())
        .map(|i| {
            let w = &series[(i + 1).saturating_sub(window)..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect())
}

/// Six significant digits, no trailing zeros, `.` as decimal separator.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=9).contains(&exp) {
        let s = format!("{v:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{e}");
    }
    if exp > 5 {
        let unit = 10f64.powi(exp - 5);
        return format!("{:.0}", (v / unit).round() * unit);
    }
    let decimals = (5 - exp) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl TrainRecord {
    pub fn steps_csv(&self) -> String {
        let mut s = String::from("step,segment,loss,lr\n");
        for r in &self.steps {
            let _ = writeln!(s, "{},{},{},{}", r.step, r.segment, fmt_sig(r.loss), fmt_sig(r.lr));
        }
        s
    }

    pub fn epochs_csv(&self) -> String {
        let mut s = String::from(
            "# train_loss: mean segment loss over the epoch; train_acc: final-segment logits; timings in timing.csv\n\
             epoch,train_loss,train_acc,test_acc\n",
        );
        for r in &self.epochs {
            let test = r.test_acc.map(fmt_sig).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.epoch,
                fmt_sig(r.train_loss),
                fmt_sig(r.train_acc),
                test
            );
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("epoch,train_seconds,eval_seconds,steps\n");
        for r in &self.timing {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.epoch,
                fmt_sig(r.train_seconds),
                fmt_sig(r.eval_seconds),
                r.steps
            );
        }
        s
    }

    /// Writes `steps.csv`, `epochs.csv` and `timing.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write(&dir.join("steps.csv"), &self.steps_csv())?;
        write(&dir.join("epochs.csv"), &self.epochs_csv())?;
        write(&dir.join("timing.csv"), &self.timing_csv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(moving_average(&[5.0; 4], 3).unwrap(), vec![5.0; 4]);
        assert_eq!(moving_average(&[1.0, 7.0], 1).unwrap(), vec![1.0, 7.0]);
        assert!(matches!(moving_average(&[1.0], 0), Err(Error::Contract(_))));
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.123456789), "0.123457");
        assert_eq!(fmt_sig(1.234567891), "1.23457");
        assert_eq!(fmt_sig(0.9801), "0.9801");
        assert_eq!(fmt_sig(3e-4), "0.0003");
        assert_eq!(fmt_sig(1234567.0), "1234570");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(6.0e-7), "6e-7");
        assert_eq!(fmt_sig(-1.234567e-8), "-1.23457e-8");
    }

    #[test]
    fn csv_headers_and_rows() {
        let r = TrainRecord {
            steps: vec![StepRow {
                step: 0,
                segment: 1,
                loss: 2.5,
                lr: 3e-6,
            }],
            epochs: vec![EpochRow {
                epoch: 1,
                train_loss: 0.4,
                train_acc: 0.87,
                test_acc: None,
            }],
            timing: vec![],
        };
        assert_eq!(r.steps_csv(), "step,segment,loss,lr\n0,1,2.5,3e-6\n");
        assert!(r.epochs_csv().ends_with("epoch,train_loss,train_acc,test_acc\n1,0.4,0.87,\n"));
    }
}
