use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
///
/// Returns the norm before clipping. `names[i]` labels `grads[i]` in errors.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: f64, names: &[&str]) -> Result<f64> {
    let mut total = 0.0f64;
    for (i, g) in grads.iter().enumerate() {
        if !g.all_finite() {
            let name = names.get(i).copied().unwrap_or("?");
            return Err(Error::Numeric(format!("non-finite gradient for parameter '{name}'")));
        }
        total += g.sq_norm_f64();
    }
    let norm = total.sqrt();
    if norm > max_norm {
        let scale = T::of(max_norm / norm);
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(gs: &[Tensor<f64>]) -> f64 {
        gs.iter().map(|g| g.sq_norm_f64()).sum::<f64>().sqrt()
    }

    #[test]
    fn small_norm_untouched() {
        let mut g = vec![Tensor::<f64>::from_f64(&[2], &[0.3, 0.4]).unwrap()];
        let before = g.clone();
        assert!((clip_global_norm(&mut g, 1.0, &["a"]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(g, before);
    }

    #[test]
    fn three_four_scaled_to_unit() {
        let mut g = vec![Tensor::<f64>::from_f64(&[2], &[3.0, 4.0]).unwrap()];
        clip_global_norm(&mut g, 1.0, &["a"]).unwrap();
        assert!(g[0].max_abs_diff(&Tensor::from_f64(&[2], &[0.6, 0.8]).unwrap()) < 1e-12);
    }

    #[test]
    fn idempotent_and_bounded() {
        let mut g = vec![
            Tensor::from_fn(&[3, 4], |i| (i as f64 * 1.3).sin() * 2.0),
            Tensor::from_fn(&[5], |i| (i as f64).cos()),
        ];
        let raw = norm(&g);
        clip_global_norm(&mut g, 1.0, &["a", "b"]).unwrap();
        assert!((norm(&g) - raw.min(1.0)).abs() < 1e-6);
        let once = g.clone();
        clip_global_norm(&mut g, 1.0, &["a", "b"]).unwrap();
        for (a, b) in g.iter().zip(&once) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn non_finite_names_parameter() {
        let mut g = vec![Tensor::<f64>::zeros(&[2]), Tensor::from_f64(&[1], &[f64::NAN]).unwrap()];
        match clip_global_norm(&mut g, 1.0, &["ok", "head.w_out"]) {
            Err(Error::Numeric(m)) => assert!(m.contains("head.w_out")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
