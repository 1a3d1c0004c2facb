//! Forward passes against direct loop implementations, in 64-bit.

mod common;

use common::rand_tensor;
use hrm_vision::nn::{geglu_ffn, mhsa, AttentionWeights, ParamStore, Tokenizer};
use hrm_vision::optim::label_smoothed_ce;
use hrm_vision::tensor::{BatchNormState, Mode, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(t: &Tensor<f64>) -> Var<f64> {
    Var::constant(t.clone())
}

fn at(t: &Tensor<f64>, idx: &[usize]) -> f64 {
    let mut off = 0;
    for (i, s) in idx.iter().zip(t.shape()) {
        off = off * s + i;
    }
    t.data()[off]
}

fn loop_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    out
}

fn close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol * (1.0 + w.abs()), "index {i}: {g} vs {w}");
    }
}

#[test]
fn matmul_matches_triple_loop() {
    let (a, b) = (rand_tensor(&[5, 7], 1), rand_tensor(&[7, 3], 2));
    let y = c(&a).matmul(&c(&b)).unwrap();
    close(y.value().data(), &loop_matmul(a.data(), b.data(), 5, 7, 3), 1e-12);
    // Large enough to take the blocked path.
    let (a, b) = (rand_tensor(&[67, 130], 3), rand_tensor(&[130, 33], 4));
    let y = c(&a).matmul(&c(&b)).unwrap();
    close(y.value().data(), &loop_matmul(a.data(), b.data(), 67, 130, 33), 1e-12);
}

#[test]
fn conv2d_matches_padded_loop() {
    let (x, k) = (rand_tensor(&[2, 5, 4, 3], 5), rand_tensor(&[3, 3, 3, 4], 6));
    let y = c(&x).conv2d(&c(&k)).unwrap();
    assert_eq!(y.shape(), &[2, 5, 4, 4]);
    let mut want = Vec::new();
    for b in 0..2 {
        for i in 0..5i64 {
            for j in 0..4i64 {
                for o in 0..4 {
                    let mut s = 0.0;
                    for di in 0..3i64 {
                        for dj in 0..3i64 {
                            let (ii, jj) = (i + di - 1, j + dj - 1);
                            if !(0..5).contains(&ii) || !(0..4).contains(&jj) {
                                continue;
                            }
                            for ci in 0..3 {
                                s += at(&x, &[b, ii as usize, jj as usize, ci])
                                    * at(&k, &[di as usize, dj as usize, ci, o]);
                            }
                        }
                    }
                    want.push(s);
                }
            }
        }
    }
    close(y.value().data(), &want, 1e-12);
}

#[test]
fn maxpool_matches_window_max() {
    let x = rand_tensor(&[2, 4, 6, 3], 7);
    let y = c(&x).maxpool2d().unwrap();
    assert_eq!(y.shape(), &[2, 2, 3, 3]);
    let mut want = Vec::new();
    for b in 0..2 {
        for i in 0..2 {
            for j in 0..3 {
                for ch in 0..3 {
                    let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|(di, dj)| at(&x, &[b, 2 * i + di, 2 * j + dj, ch]))
                        .fold(f64::NEG_INFINITY, f64::max);
                    want.push(m);
                }
            }
        }
    }
    close(y.value().data(), &want, 0.0);
}

#[test]
fn batch_norm_matches_per_channel_statistics() {
    let x = rand_tensor(&[3, 2, 2, 4], 8);
    let (g, b) = (rand_tensor(&[4], 9), rand_tensor(&[4], 10));
    let mut state = BatchNormState::new(4);
    let y = c(&x).batch_norm2d(&c(&g), &c(&b), &mut state, Mode::Train).unwrap();
    let n = 12;
    for ch in 0..4 {
        let vals: Vec<f64> = x.data().iter().skip(ch).step_by(4).copied().collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        for (k, v) in vals.iter().enumerate() {
            let want = (v - mean) / (var + 1e-5).sqrt() * g.data()[ch] + b.data()[ch];
            assert!((y.value().data()[k * 4 + ch] - want).abs() < 1e-12);
        }
        assert!((state.running_mean.data()[ch] - 0.1 * mean).abs() < 1e-12);
        let unbiased = var * n as f64 / (n - 1) as f64;
        assert!((state.running_var.data()[ch] - (0.9 + 0.1 * unbiased)).abs() < 1e-12);
    }
    // Eval mode reads the running statistics and leaves them alone.
    let before = state.clone();
    let e = c(&x).batch_norm2d(&c(&g), &c(&b), &mut state, Mode::Eval).unwrap();
    assert_eq!(state, before);
    let want = (x.data()[0] - before.running_mean.data()[0]) / (before.running_var.data()[0] + 1e-5).sqrt()
        * g.data()[0]
        + b.data()[0];
    assert!((e.value().data()[0] - want).abs() < 1e-12);
}

fn rope_loop(v: &mut [f64], pos: usize) {
    let dh = v.len();
    for i in 0..dh / 2 {
        let theta = pos as f64 * 10_000f64.powf(-2.0 * i as f64 / dh as f64);
        let (a, b) = (v[2 * i], v[2 * i + 1]);
        v[2 * i] = a * theta.cos() - b * theta.sin();
        v[2 * i + 1] = a * theta.sin() + b * theta.cos();
    }
}

#[test]
fn attention_matches_per_head_loops() {
    let (bsz, s, d, h) = (2, 4, 8, 2);
    let dh = d / h;
    let x = rand_tensor(&[bsz, s, d], 11);
    let w: Vec<Tensor<f64>> = (0..4).map(|i| rand_tensor(&[d, d], 12 + i)).collect();
    let wv: Vec<Var<f64>> = w.iter().map(c).collect();
    let y = mhsa(
        &c(&x),
        &AttentionWeights {
            wq: &wv[0],
            wk: &wv[1],
            wv: &wv[2],
            wo: &wv[3],
        },
        h,
    )
    .unwrap();
    let mut want = Vec::new();
    for b in 0..bsz {
        let xb = &x.data()[b * s * d..(b + 1) * s * d];
        let q = loop_matmul(xb, w[0].data(), s, d, d);
        let k = loop_matmul(xb, w[1].data(), s, d, d);
        let v = loop_matmul(xb, w[2].data(), s, d, d);
        let mut concat = vec![0.0; s * d];
        for head in 0..h {
            let slice = |m: &[f64], t: usize, rot: bool| {
                let mut r = m[t * d + head * dh..t * d + (head + 1) * dh].to_vec();
                if rot {
                    rope_loop(&mut r, t);
                }
                r
            };
            for t in 0..s {
                let qt = slice(&q, t, true);
                let scores: Vec<f64> = (0..s)
                    .map(|u| qt.iter().zip(slice(&k, u, true)).map(|(a, b)| a * b).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|z| (z - mx).exp()).collect();
                let z: f64 = e.iter().sum();
                for u in 0..s {
                    let vu = slice(&v, u, false);
                    for j in 0..dh {
                        concat[t * d + head * dh + j] += e[u] / z * vu[j];
                    }
                }
            }
        }
        want.extend(loop_matmul(&concat, w[3].data(), s, d, d));
    }
    close(y.value().data(), &want, 1e-12);
}

#[test]
fn geglu_matches_formula() {
    let x = rand_tensor(&[3, 4], 20);
    let (wa, wb, wo) = (rand_tensor(&[4, 6], 21), rand_tensor(&[4, 6], 22), rand_tensor(&[6, 4], 23));
    let y = geglu_ffn(&c(&x), &c(&wa), &c(&wb), &c(&wo)).unwrap();
    let a = loop_matmul(x.data(), wa.data(), 3, 4, 6);
    let g = loop_matmul(x.data(), wb.data(), 3, 4, 6);
    let gelu = |u: f64| 0.5 * u * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (u + 0.044715 * u.powi(3))).tanh());
    let h: Vec<f64> = a.iter().zip(&g).map(|(a, g)| a * gelu(*g)).collect();
    close(y.value().data(), &loop_matmul(&h, wo.data(), 3, 6, 4), 1e-12);
}

#[test]
fn tokenizer_matches_patch_loop() {
    let mut store = ParamStore::<f64>::new();
    let tok = Tokenizer::new(2, 3, 5, &mut store, &mut ChaCha8Rng::seed_from_u64(24)).unwrap();
    common::randomize(&mut store, 25);
    let img = rand_tensor(&[2, 4, 6, 3], 26);
    let y = tok.forward(&store.bind(false), &c(&img)).unwrap();
    assert_eq!(y.shape(), &[2, 7, 5]);
    let w = store.get(tok.w_patch);
    let cls = store.get(tok.cls);
    let mut want = Vec::new();
    for b in 0..2 {
        want.extend_from_slice(cls.data());
        for gy in 0..2 {
            for gx in 0..3 {
                for dd in 0..5 {
                    let mut s = 0.0;
                    for py in 0..2 {
                        for px in 0..2 {
                            for ch in 0..3 {
                                s += at(&img, &[b, gy * 2 + py, gx * 2 + px, ch]) * at(w, &[(py * 2 + px) * 3 + ch, dd]);
                            }
                        }
                    }
                    want.push(s);
                }
            }
        }
    }
    close(y.value().data(), &want, 1e-12);
}

#[test]
fn smoothed_cross_entropy_matches_formula() {
    let logits = rand_tensor(&[3, 4], 27).map(|v| 3.0 * v);
    let labels = [2, 0, 3];
    let eps = 0.1;
    let got = label_smoothed_ce(&c(&logits), &labels, eps).unwrap().value().data()[0];
    let mut want = 0.0;
    for (b, y) in labels.iter().enumerate() {
        let row = &logits.data()[b * 4..b * 4 + 4];
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        for (k, l) in row.iter().enumerate() {
            let target = (1.0 - eps) * f64::from(u8::from(k == *y)) + eps / 4.0;
            want -= target * (l - lse);
        }
    }
    assert!((got - want / 3.0).abs() < 1e-12);
}
