#![allow(dead_code)]

use hrm_vision::hrm::{EvalStates, Hrm, HrmConfig, HrmState};
use hrm_vision::nn::{
    encoder_block, geglu_ffn, mhsa, rmsnorm, rope_apply, AttentionWeights, EncoderConfig, EncoderLayer, EncoderStack,
    HaltingHead, NormPlacement, OutputHead, ParamStore, Tokenizer,
};
use hrm_vision::optim::label_smoothed_ce;
use hrm_vision::tensor::{BatchNormState, Mode, Tensor, Var};
use hrm_vision::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type OpFn = dyn Fn(&[Var<f64>]) -> Result<Var<f64>>;
pub type Op = Box<OpFn>;

/// Uniform values in `[-1, 1]`.
pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values bounded away from zero and from each other.
pub fn spread_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    Tensor::from_fn(shape, |i| {
        let r = order[i] as f64 / n as f64;
        let v = 0.1 + r;
        if order[i].is_multiple_of(2) { v } else { -v }
    })
}

fn weighted_sum(out: &Var<f64>) -> Result<Var<f64>> {
    let w = Tensor::from_fn(out.shape(), |i| ((i as f64) * 0.7311 + 0.3).sin());
    Ok(out.mul(&Var::constant(w))?.sum())
}

/// Worst relative error, over inputs, between the tape gradient and central
/// differences of `Σ w ⊙ f(inputs)` for a fixed weight pattern `w`.
pub fn grad_error(inputs: &[Tensor<f64>], f: &OpFn) -> Result<f64> {
    let leaves: Vec<Var<f64>> = inputs.iter().cloned().map(Var::leaf).collect();
    let grads = weighted_sum(&f(&leaves)?)?.backward()?;
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let vars: Vec<Var<f64>> = xs.iter().cloned().map(Var::constant).collect();
        Ok(weighted_sum(&f(&vars)?)?.value().data()[0])
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, leaf) in leaves.iter().enumerate() {
        let analytic = grads.wrt(leaf);
        let mut xs = inputs.to_vec();
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for i in 0..inputs[k].len() {
            let orig = xs[k].data()[i];
            xs[k].data_mut()[i] = orig + h;
            let plus = eval(&xs)?;
            xs[k].data_mut()[i] = orig - h;
            let minus = eval(&xs)?;
            xs[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.data()[i];
            diff += (a - numeric).powi(2);
            scale += a.powi(2).max(numeric.powi(2));
        }
        if scale > 1e-20 {
            worst = worst.max((diff / scale).sqrt());
        }
    }
    Ok(worst)
}

fn enc_cfg(norm: NormPlacement, layers: usize) -> EncoderConfig {
    EncoderConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: layers,
        mlp_mult: 2,
        norm,
    }
}

/// Stores the parameters of a module as the leading inputs of a check.
fn store_inputs(store: &ParamStore<f64>) -> Vec<Tensor<f64>> {
    store.iter().map(|p| p.value.clone()).collect()
}

/// Every differentiable op and block with its inputs.
pub fn gradcheck_cases() -> Vec<(String, Vec<Tensor<f64>>, Op)> {
    let mut cases: Vec<(String, Vec<Tensor<f64>>, Op)> = Vec::new();
    let mut add = |name: &str, inputs: Vec<Tensor<f64>>, op: Op| cases.push((name.to_string(), inputs, op));

    add("add", vec![rand_tensor(&[3, 4], 1), rand_tensor(&[3, 4], 2)], Box::new(|v| v[0].add(&v[1])));
    add("add_bias", vec![rand_tensor(&[2, 3, 4], 3), rand_tensor(&[4], 4)], Box::new(|v| v[0].add(&v[1])));
    add("sub", vec![rand_tensor(&[3, 4], 5), rand_tensor(&[3, 4], 6)], Box::new(|v| v[0].sub(&v[1])));
    add("mul", vec![rand_tensor(&[3, 4], 7), rand_tensor(&[3, 4], 8)], Box::new(|v| v[0].mul(&v[1])));
    add("mul_gain", vec![rand_tensor(&[2, 3, 4], 9), rand_tensor(&[4], 10)], Box::new(|v| v[0].mul(&v[1])));
    add("scale", vec![rand_tensor(&[5], 11)], Box::new(|v| Ok(v[0].scale(-1.7))));
    add("gelu", vec![rand_tensor(&[4, 5], 12).map(|x| 3.0 * x)], Box::new(|v| Ok(v[0].gelu())));
    add("relu", vec![spread_tensor(&[4, 5], 13)], Box::new(|v| Ok(v[0].relu())));
    add("sigmoid", vec![rand_tensor(&[4, 5], 14).map(|x| 4.0 * x)], Box::new(|v| Ok(v[0].sigmoid())));
    add("matmul", vec![rand_tensor(&[5, 7], 15), rand_tensor(&[7, 3], 16)], Box::new(|v| v[0].matmul(&v[1])));
    add("matmul_rank3", vec![rand_tensor(&[2, 3, 4], 17), rand_tensor(&[4, 5], 18)], Box::new(|v| v[0].matmul(&v[1])));
    add(
        "batched_matmul",
        vec![rand_tensor(&[2, 3, 4, 5], 19), rand_tensor(&[2, 3, 5, 2], 20)],
        Box::new(|v| v[0].batched_matmul(&v[1], false)),
    );
    add(
        "batched_matmul_t",
        vec![rand_tensor(&[2, 3, 4, 5], 21), rand_tensor(&[2, 3, 6, 5], 22)],
        Box::new(|v| v[0].batched_matmul(&v[1], true)),
    );
    add("reshape", vec![rand_tensor(&[2, 6], 23)], Box::new(|v| v[0].reshape(&[3, 4])));
    add("permute", vec![rand_tensor(&[2, 3, 4], 24)], Box::new(|v| v[0].permute(&[2, 0, 1])));
    add("select", vec![rand_tensor(&[2, 3, 4], 25)], Box::new(|v| v[0].select(1, 2)));
    add(
        "concat",
        vec![rand_tensor(&[2, 1, 4], 26), rand_tensor(&[2, 3, 4], 27)],
        Box::new(|v| Var::concat(&[v[0].clone(), v[1].clone()], 1)),
    );
    add("expand", vec![rand_tensor(&[1, 1, 4], 28)], Box::new(|v| v[0].expand(&[3, 2, 4])));
    add("sum", vec![rand_tensor(&[3, 4], 29)], Box::new(|v| Ok(v[0].sum())));
    add("mean", vec![rand_tensor(&[3, 4], 30)], Box::new(|v| Ok(v[0].mean())));
    add("mean_axis", vec![rand_tensor(&[2, 3, 4], 31)], Box::new(|v| v[0].mean_axis(1)));
    add("softmax_last", vec![rand_tensor(&[3, 5], 32).map(|x| 2.0 * x)], Box::new(|v| v[0].softmax(1)));
    add("softmax_mid", vec![rand_tensor(&[2, 4, 3], 33).map(|x| 2.0 * x)], Box::new(|v| v[0].softmax(1)));
    add("rms_normalize", vec![rand_tensor(&[3, 6], 34)], Box::new(|v| Ok(v[0].rms_normalize(1e-6))));
    add("rmsnorm", vec![rand_tensor(&[2, 3, 6], 35), rand_tensor(&[6], 36)], Box::new(|v| rmsnorm(&v[0], &v[1])));
    add(
        "rope",
        vec![rand_tensor(&[2, 5, 6], 37)],
        Box::new(|v| rope_apply(&v[0], &[0, 1, 2, 3, 4], 10_000.0)),
    );
    add("conv2d", vec![rand_tensor(&[2, 4, 5, 3], 38), rand_tensor(&[3, 3, 3, 2], 39)], Box::new(|v| v[0].conv2d(&v[1])));
    add("maxpool2d", vec![spread_tensor(&[2, 4, 6, 3], 40)], Box::new(|v| v[0].maxpool2d()));
    add(
        "batch_norm2d",
        vec![rand_tensor(&[2, 3, 3, 4], 41), rand_tensor(&[4], 42), rand_tensor(&[4], 43)],
        Box::new(|v| v[0].batch_norm2d(&v[1], &v[2], &mut BatchNormState::new(4), Mode::Train)),
    );
    add(
        "label_smoothed_ce",
        vec![rand_tensor(&[4, 5], 44).map(|x| 3.0 * x)],
        Box::new(|v| label_smoothed_ce(&v[0], &[0, 3, 4, 1], 0.1)),
    );
    add(
        "mhsa",
        vec![
            rand_tensor(&[2, 3, 8], 45),
            rand_tensor(&[8, 8], 46),
            rand_tensor(&[8, 8], 47),
            rand_tensor(&[8, 8], 48),
            rand_tensor(&[8, 8], 49),
        ],
        Box::new(|v| {
            let w = AttentionWeights {
                wq: &v[1],
                wk: &v[2],
                wv: &v[3],
                wo: &v[4],
            };
            mhsa(&v[0], &w, 2)
        }),
    );
    add(
        "geglu_ffn",
        vec![
            rand_tensor(&[2, 3, 4], 50),
            rand_tensor(&[4, 6], 51),
            rand_tensor(&[4, 6], 52),
            rand_tensor(&[6, 4], 53),
        ],
        Box::new(|v| geglu_ffn(&v[0], &v[1], &v[2], &v[3])),
    );

    // Modules: parameters first, then the data input.
    for norm in [NormPlacement::Pre, NormPlacement::Post] {
        let cfg = enc_cfg(norm, 1);
        let mut store = ParamStore::<f64>::new();
        let layer = EncoderLayer::new(&cfg, &mut store, "l", &mut ChaCha8Rng::seed_from_u64(54));
        randomize(&mut store, 55);
        let n = store.len();
        let mut inputs = store_inputs(&store);
        inputs.push(rand_tensor(&[2, 3, 8], 56));
        add(
            &format!("encoder_block_{norm}"),
            inputs,
            Box::new(move |v| encoder_block(&v[n], &layer, &hrm_vision::nn::Bound::from_vars(v[..n].to_vec()), &cfg)),
        );
    }
    {
        let cfg = enc_cfg(NormPlacement::Post, 2);
        let mut store = ParamStore::<f64>::new();
        let stack = EncoderStack::new(cfg, &mut store, "s", &mut ChaCha8Rng::seed_from_u64(57)).unwrap();
        randomize(&mut store, 58);
        let n = store.len();
        let mut inputs = store_inputs(&store);
        inputs.push(rand_tensor(&[1, 3, 8], 59));
        add(
            "encoder_stack",
            inputs,
            Box::new(move |v| stack.forward(&hrm_vision::nn::Bound::from_vars(v[..n].to_vec()), &v[n])),
        );
    }
    {
        let mut store = ParamStore::<f64>::new();
        let tok = Tokenizer::new(2, 3, 8, &mut store, &mut ChaCha8Rng::seed_from_u64(60)).unwrap();
        randomize(&mut store, 61);
        let n = store.len();
        let mut inputs = store_inputs(&store);
        inputs.push(rand_tensor(&[2, 4, 6, 3], 62));
        add(
            "tokenizer",
            inputs,
            Box::new(move |v| tok.forward(&hrm_vision::nn::Bound::from_vars(v[..n].to_vec()), &v[n])),
        );
    }
    {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let head = OutputHead::new(8, 5, &mut store, &mut rng);
        let halt = HaltingHead::new(8, &mut store, &mut rng);
        randomize(&mut store, 64);
        let n = store.len();
        let mut inputs = store_inputs(&store);
        inputs.push(rand_tensor(&[3, 4, 8], 65));
        add(
            "heads",
            inputs,
            Box::new(move |v| {
                let p = hrm_vision::nn::Bound::from_vars(v[..n].to_vec());
                let logits = head.logits(&p, &v[n])?;
                let q = halt.scores(&p, &v[n])?;
                Var::concat(&[logits, q], 1)
            }),
        );
    }
    {
        // One low and one high update followed by the head, from fixed states.
        let cfg = tiny_hrm();
        let model = Hrm::<f64>::new(cfg).unwrap();
        let mut store = model.params.clone();
        randomize(&mut store, 66);
        let n = store.len();
        let mut inputs = store_inputs(&store);
        inputs.push(rand_tensor(&[2, 4, 8, 1], 67));
        let (zl, zh) = (rand_tensor(&[2, 3, 8], 68), rand_tensor(&[2, 3, 8], 69));
        add(
            "hrm_update_pair",
            inputs,
            Box::new(move |v| {
                let p = hrm_vision::nn::Bound::from_vars(v[..n].to_vec());
                let x = model.tokenizer.forward(&p, &v[n])?;
                let mut s = HrmState {
                    z_low: Var::constant(zl.clone()),
                    z_high: Var::constant(zh.clone()),
                };
                s.z_low = model.low_step(&p, &s, &x)?;
                s.z_high = model.high_step(&p, &s)?;
                model.head.logits(&p, &s.z_high)
            }),
        );
    }
    cases
}

/// Replaces every parameter with a `[-0.5, 0.5]` draw so gains are not all one.
pub fn randomize(store: &mut ParamStore<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in store.iter_mut() {
        p.value = Tensor::from_fn(p.value.shape(), |_| rng.random_range(-0.5..0.5));
        if p.name.ends_with("norm") {
            p.value = p.value.map(|g| 1.0 + g);
        }
    }
}

/// `D=8`, `S=3`, one layer per module, `N=2`, `T=2`.
pub fn tiny_hrm() -> HrmConfig {
    HrmConfig {
        image_height: 4,
        image_width: 8,
        in_channels: 1,
        patch_size: 4,
        d_model: 8,
        n_heads: 2,
        low_layers: 1,
        high_layers: 1,
        mlp_mult: 2,
        norm: NormPlacement::Post,
        n_cycles: 2,
        t_micro: 2,
        m_train: 2,
        m_eval: 2,
        num_classes: 3,
        init_seed: 3,
        state_seed: 4,
        eval_states: EvalStates::Fixed,
        halt_threshold: None,
    }
}

/// Largest relative error between the training segment's gradients and a
/// replay that recomputes the recurrence without a tape, substitutes the
/// penultimate states as constants and differentiates only the final pair
/// of updates.
pub fn one_step_oracle_error(norm: NormPlacement, seed: u64) -> Result<f64> {
    let cfg = HrmConfig { norm, ..tiny_hrm() };
    let mut model = Hrm::<f64>::new(cfg.clone())?;
    randomize(&mut model.params, seed);
    let images = rand_tensor(&[2, 4, 8, 1], seed + 1);
    let labels = [2, 0];
    let start = model.initial_state(2);

    let params = model.params.bind(true);
    let x = model.tokens(&params, &images)?;
    let out = model.run_segment(&params, &x, &start, Mode::Train)?;
    let loss = label_smoothed_ce(&out.logits, &labels, 0.05)?;
    let got = params.grads(&loss.backward()?);

    // Replay without any tape up to the final low-level update.
    let plain = model.params.bind(false);
    let x_plain = model.tokens(&plain, &images)?;
    let mut s = HrmState {
        z_low: Var::constant(start.z_low.value().clone()),
        z_high: Var::constant(start.z_high.value().clone()),
    };
    for i in 0..cfg.n_cycles {
        let steps = if i == cfg.n_cycles - 1 { cfg.t_micro - 1 } else { cfg.t_micro };
        for _ in 0..steps {
            s.z_low = model.low_step(&plain, &s, &x_plain)?;
        }
        if i < cfg.n_cycles - 1 {
            s.z_high = model.high_step(&plain, &s)?;
        }
    }
    let mut c = HrmState {
        z_low: Var::constant(s.z_low.value().clone()),
        z_high: Var::constant(s.z_high.value().clone()),
    };
    let fresh = model.params.bind(true);
    let x_fresh = model.tokens(&fresh, &images)?;
    c.z_low = model.low_step(&fresh, &c, &x_fresh)?;
    c.z_high = model.high_step(&fresh, &c)?;
    let logits = model.head.logits(&fresh, &c.z_high)?;
    let oracle_loss = label_smoothed_ce(&logits, &labels, 0.05)?;
    let want = fresh.grads(&oracle_loss.backward()?);

    let loss_gap = (loss.value().data()[0] - oracle_loss.value().data()[0]).abs();
    let mut worst = loss_gap;
    for (g, w) in got.iter().zip(&want) {
        let scale = w.sq_norm_f64().sqrt().max(1e-30);
        let diff = g
            .data()
            .iter()
            .zip(w.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if w.sq_norm_f64() > 0.0 || g.sq_norm_f64() > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}
