//! Central-difference check of an encoder block's gradients in `f64`.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use hrm_vision::nn::{EncoderConfig, EncoderStack, NormPlacement, ParamStore};
use hrm_vision::tensor::{Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hrm_vision::Result<()> {
    for norm in [NormPlacement::Pre, NormPlacement::Post] {
        let cfg = EncoderConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            mlp_mult: 2,
            norm,
        };
        let mut store = ParamStore::<f64>::new();
        let stack = EncoderStack::new(cfg, &mut store, "enc", &mut ChaCha8Rng::seed_from_u64(0))?;
        // Larger weights than the 0.02 init so every path carries signal.
        for p in store.iter_mut() {
            if !p.name.ends_with("norm") {
                p.value = p.value.map(|v| v * 20.0);
            }
        }
        let x = Tensor::from_fn(&[2, 3, 8], |i| (i as f64 * 0.37).sin());
        let weights = Tensor::from_fn(&[2, 3, 8], |i| (i as f64 * 0.11).cos());
        let loss = |store: &ParamStore<f64>, tracked: bool| -> hrm_vision::Result<(Var<f64>, _)> {
            let params = store.bind(tracked);
            let y = stack.forward(&params, &Var::constant(x.clone()))?;
            Ok((y.mul(&Var::constant(weights.clone()))?.sum(), params))
        };

        let (l, params) = loss(&store, true)?;
        let grads = params.grads(&l.backward()?);
        let h = 1e-5;
        println!("{norm}-norm block");
        for (k, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let mut diff = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..store.get(id).len() {
                let orig = store.get(id).data()[i];
                store.get_mut(id).data_mut()[i] = orig + h;
                let plus = loss(&store, false)?.0.value().data()[0];
                store.get_mut(id).data_mut()[i] = orig - h;
                let minus = loss(&store, false)?.0.value().data()[0];
                store.get_mut(id).data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                diff += (grads[k].data()[i] - numeric).powi(2);
                scale += grads[k].data()[i].powi(2);
            }
            println!("  {:<22} rel err {:.2e}", store.name(id), (diff / scale.max(1e-30)).sqrt());
        }
    }
    Ok(())
}
