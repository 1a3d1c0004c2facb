use rand::Rng;

use super::{Bound, ParamId, ParamStore, INIT_STD};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Var};

/// Non-overlapping patch embedding with a learned CLS token in front.
#[derive(Clone, Debug)]
pub struct Tokenizer {
    pub patch_size: usize,
    pub in_channels: usize,
    pub d_model: usize,
    /// `[P·P·C, D]`
    pub w_patch: ParamId,
    /// `[D]`
    pub cls: ParamId,
}

impl Tokenizer {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        patch_size: usize,
        in_channels: usize,
        d_model: usize,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<Self> {
        if patch_size == 0 || in_channels == 0 {
            return Err(Error::Config("patch size and channels must be positive".into()));
        }
        let w_patch = store.add_truncated_normal(
            "tokenizer.w_patch",
            &[patch_size * patch_size * in_channels, d_model],
            INIT_STD,
            rng,
        );
        let cls = store.add_truncated_normal("tokenizer.cls", &[d_model], INIT_STD, rng);
        Ok(Self {
            patch_size,
            in_channels,
            d_model,
            w_patch,
            cls,
        })
    }

    /// `S = 1 + (H/P)(W/P)`.
    pub fn seq_len(&self, height: usize, width: usize) -> Result<usize> {
        let p = self.patch_size;
        if !height.is_multiple_of(p) || !width.is_multiple_of(p) {
            return Err(Error::Config(format!(
                "image {height}x{width} is not divisible into {p}x{p} patches"
            )));
        }
        Ok(1 + (height / p) * (width / p))
    }

    pub fn num_params(&self) -> usize {
        self.patch_size * self.patch_size * self.in_channels * self.d_model + self.d_model
    }

    /// `[B,H,W,C] -> [B,S,D]`, patches in row-major order, CLS at index 0.
    pub fn forward<T: Scalar>(&self, params: &Bound<T>, images: &Var<T>) -> Result<Var<T>> {
        let shape = images.shape();
        if shape.len() != 4 || shape[3] != self.in_channels {
            return Err(Error::Config(format!(
                "tokenizer expects [B,H,W,{}], got {shape:?}",
                self.in_channels
            )));
        }
        let (b, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
        let s = self.seq_len(h, w)?;
        let p = self.patch_size;
        let (gh, gw) = (h / p, w / p);
        let patches = images
            .reshape(&[b, gh, p, gw, p, c])?
            .permute(&[0, 1, 3, 2, 4, 5])?
            .reshape(&[b, gh * gw, p * p * c])?
            .matmul(&params[self.w_patch])?;
        let cls = params[self.cls]
            .reshape(&[1, 1, self.d_model])?
            .expand(&[b, 1, self.d_model])?;
        let tokens = Var::concat(&[cls, patches], 1)?;
        debug_assert_eq!(tokens.shape(), &[b, s, self.d_model]);
        Ok(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tok(channels: usize) -> (Tokenizer, ParamStore<f64>) {
        let mut store = ParamStore::new();
        let t = Tokenizer::new(4, channels, 8, &mut store, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        (t, store)
    }

    #[test]
    fn sequence_lengths() {
        let (t, _) = tok(3);
        assert_eq!(t.seq_len(32, 32).unwrap(), 65);
        assert_eq!(t.seq_len(28, 28).unwrap(), 50);
        assert_eq!(t.seq_len(4, 4).unwrap(), 2);
        assert!(matches!(t.seq_len(30, 32), Err(Error::Config(_))));
    }

    #[test]
    fn single_patch_is_flattened_projection() {
        let (t, store) = tok(1);
        let img = Tensor::<f64>::from_fn(&[1, 4, 4, 1], |i| i as f64 * 0.1);
        let params = store.bind(false);
        let y = t.forward(&params, &Var::constant(img.clone())).unwrap();
        assert_eq!(y.shape(), &[1, 2, 8]);
        assert_eq!(&y.value().data()[..8], store.get(t.cls).data());
        let flat = Var::constant(img.reshape(&[1, 16]).unwrap());
        let want = flat.matmul(&params[t.w_patch]).unwrap();
        assert!(Tensor::new(&[8], y.value().data()[8..].to_vec()).unwrap().max_abs_diff(
            &want.value().clone().reshape(&[8]).unwrap()
        ) < 1e-12);
    }

    #[test]
    fn patches_are_row_major() {
        let (t, store) = tok(1);
        // Each 4x4 patch of an 8x8 image is filled with its patch index.
        let img = Tensor::<f64>::from_fn(&[1, 8, 8, 1], |i| {
            let (y, x) = (i / 8, i % 8);
            ((y / 4) * 2 + x / 4) as f64
        });
        let y = t.forward(&store.bind(false), &Var::constant(img)).unwrap();
        let col_sum: f64 = store.get(t.w_patch).data().chunks(8).map(|r| r[0]).sum();
        for patch in 0..4 {
            let got = y.value().data()[(1 + patch) * 8];
            assert!((got - patch as f64 * col_sum).abs() < 1e-12);
        }
    }
}
