use super::Dataset;
use crate::error::{Error, Result};

/// Lower bound on a channel's standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel mean and standard deviation, fitted on a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let c = data.image_shape().2;
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        for px in data.images.data().chunks(c) {
            for (k, &v) in px.iter().enumerate() {
                sum[k] += v as f64;
                sq[k] += v as f64 * v as f64;
            }
        }
        let n = (data.images.len() / c.max(1)).max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(STD_FLOOR))
            .collect();
        Self { mean, std }
    }

    fn check(&self, data: &Dataset) -> Result<usize> {
        let c = data.image_shape().2;
        if c != self.mean.len() {
            return Err(Error::Data(format!(
                "standardizer has {} channels, images have {c}",
                self.mean.len()
            )));
        }
        Ok(c)
    }

    /// `(x − mean) / std` per channel, in place.
    pub fn apply(&self, data: &mut Dataset) -> Result<()> {
        let c = self.check(data)?;
        for px in data.images.data_mut().chunks_mut(c) {
            for (k, v) in px.iter_mut().enumerate() {
                *v = ((*v as f64 - self.mean[k]) / self.std[k]) as f32;
            }
        }
        Ok(())
    }

    pub fn invert(&self, data: &mut Dataset) -> Result<()> {
        let c = self.check(data)?;
        for px in data.images.data_mut().chunks_mut(c) {
            for (k, v) in px.iter_mut().enumerate() {
                *v = (*v as f64 * self.std[k] + self.mean[k]) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::Split;
    use super::*;
    use crate::tensor::Tensor;

    fn ds(f: impl FnMut(usize) -> f32) -> Dataset {
        Dataset::new(Tensor::from_fn(&[4, 3, 3, 2], f), vec![0; 4], 1, Split::Train).unwrap()
    }

    #[test]
    fn standardized_moments_and_round_trip() {
        let mut d = ds(|i| ((i * 7) % 11) as f32 / 10.0);
        let orig = d.clone();
        let s = Standardizer::fit(&d);
        s.apply(&mut d).unwrap();
        let after = Standardizer::fit(&d);
        for k in 0..2 {
            assert!(after.mean[k].abs() < 1e-5);
            assert!((after.std[k] - 1.0).abs() < 1e-4);
        }
        s.invert(&mut d).unwrap();
        assert!(d.images.max_abs_diff(&orig.images) < 1e-5);
    }

    #[test]
    fn constant_channel_goes_to_zero() {
        let mut d = ds(|i| if i % 2 == 0 { 0.5 } else { i as f32 });
        let s = Standardizer::fit(&d);
        s.apply(&mut d).unwrap();
        assert!(d.images.data().iter().step_by(2).all(|v| *v == 0.0));
    }
}
