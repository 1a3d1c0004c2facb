//! What the one-step gradient keeps and drops.
//!
//! Compares a training segment's gradients with full backpropagation through
//! the whole unrolled recurrence, and shows that the tape does not grow
//! with `N·T`.
//!
//! ```text
//! cargo run --release --example one_step_gradient
//! ```

use hrm_vision::hrm::{EvalStates, Hrm, HrmConfig};
use hrm_vision::nn::NormPlacement;
use hrm_vision::optim::label_smoothed_ce;
use hrm_vision::tensor::{Mode, Tensor};

fn config(n_cycles: usize, t_micro: usize) -> HrmConfig {
    HrmConfig {
        image_height: 8,
        image_width: 8,
        in_channels: 1,
        patch_size: 4,
        d_model: 16,
        n_heads: 2,
        low_layers: 1,
        high_layers: 1,
        mlp_mult: 2,
        norm: NormPlacement::Post,
        n_cycles,
        t_micro,
        m_train: 1,
        m_eval: 1,
        num_classes: 4,
        init_seed: 0,
        state_seed: 1,
        eval_states: EvalStates::Fixed,
        halt_threshold: None,
    }
}

fn main() -> hrm_vision::Result<()> {
    let images = Tensor::<f64>::from_fn(&[3, 8, 8, 1], |i| ((i * 37 % 11) as f64) / 11.0);
    let labels = [0, 2, 3];

    println!("{:>3} {:>3} {:>10} {:>10}", "N", "T", "one-step", "full BPTT");
    for (n, t) in [(1, 1), (2, 3), (4, 4), (8, 8)] {
        let m = Hrm::<f64>::new(config(n, t))?;
        let p = m.params.bind(true);
        let x = m.tokens(&p, &images)?;
        let out = m.run_segment(&p, &x, &m.initial_state(3), Mode::Train)?;
        let one = label_smoothed_ce(&out.logits, &labels, 0.0)?.tape_len();

        let p = m.params.bind(true);
        let x = m.tokens(&p, &images)?;
        let mut s = m.initial_state(3);
        for _ in 0..n {
            for _ in 0..t {
                s.z_low = m.low_step(&p, &s, &x)?;
            }
            s.z_high = m.high_step(&p, &s)?;
        }
        let full = label_smoothed_ce(&m.head.logits(&p, &s.z_high)?, &labels, 0.0)?.tape_len();
        println!("{n:>3} {t:>3} {one:>10} {full:>10}");
    }

    let m = Hrm::<f64>::new(config(2, 3))?;
    let p = m.params.bind(true);
    let x = m.tokens(&p, &images)?;
    let out = m.run_segment(&p, &x, &m.initial_state(3), Mode::Train)?;
    let grads = p.grads(&label_smoothed_ce(&out.logits, &labels, 0.0)?.backward()?);
    println!("\ngradient norms, N=2 T=3");
    for (id, g) in m.params.ids().zip(&grads) {
        println!("  {:<28} {:.3e}", m.params.name(id), g.sq_norm_f64().sqrt());
    }
    Ok(())
}
