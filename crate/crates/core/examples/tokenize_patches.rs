//! How an image becomes the token sequence `x̃`.
//!
//! ```text
//! cargo run --release --example tokenize_patches
//! ```

use hrm_vision::nn::{ParamStore, Tokenizer};
use hrm_vision::tensor::{Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hrm_vision::Result<()> {
    let mut store = ParamStore::<f64>::new();
    let tok = Tokenizer::new(4, 1, 8, &mut store, &mut ChaCha8Rng::seed_from_u64(0))?;
    // An 8×12 image whose pixels encode their own patch index.
    let img = Tensor::from_fn(&[1, 8, 12, 1], |i| {
        let (r, c) = (i / 12, i % 12);
        ((r / 4) * 3 + c / 4) as f64
    });
    let tokens = tok.forward(&store.bind(false), &Var::constant(img))?;
    println!("8x12 image, 4x4 patches: {:?} tokens (CLS first)", tokens.shape());

    // With an all-ones projection every token is 16× its patch value.
    *store.get_mut(tok.w_patch) = Tensor::ones(&[16, 8]);
    *store.get_mut(tok.cls) = Tensor::full(&[8], -1.0);
    let img = Tensor::from_fn(&[1, 8, 12, 1], |i| (((i / 12) / 4) * 3 + (i % 12) / 4) as f64);
    let tokens = tok.forward(&store.bind(false), &Var::constant(img))?;
    for (s, row) in tokens.value().data().chunks(8).enumerate() {
        let what = if s == 0 { "CLS".to_string() } else { format!("patch {}", s - 1) };
        println!("  token {s}: {:>6.1}  ({what})", row[0]);
    }
    for (h, w) in [(28, 28), (32, 32)] {
        println!("{h}x{w} → S = {}", tok.seq_len(h, w)?);
    }
    Ok(())
}
