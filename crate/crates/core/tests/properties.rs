use std::path::Path;

use hrm_vision::data::{
    batch_order, parse_cifar, parse_idx_images, parse_idx_labels, CifarVariant, Dataset, DatasetKind, Split, Standardizer,
};
use hrm_vision::experiment::{fmt_sig, moving_average, ModelKind, RunConfig};
use hrm_vision::nn::rope_apply;
use hrm_vision::tensor::{Tensor, Var};
use proptest::prelude::*;

fn tensor(shape: &[usize], values: Vec<f64>) -> Tensor<f64> {
    Tensor::new(shape, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(
        rows in prop::collection::vec(prop::collection::vec(-30.0f64..30.0, 5), 1..6),
        shift in -50.0f64..50.0,
    ) {
        let n = rows.len();
        let flat: Vec<f64> = rows.concat();
        let p = Var::constant(tensor(&[n, 5], flat.clone())).softmax(1).unwrap();
        for r in p.value().data().chunks(5) {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let q = Var::constant(tensor(&[n, 5], flat.iter().map(|v| v + shift).collect())).softmax(1).unwrap();
        prop_assert!(p.value().max_abs_diff(q.value()) < 1e-12);
    }

    #[test]
    fn matmul_distributes_over_addition(
        a in prop::collection::vec(-2.0f64..2.0, 12),
        b in prop::collection::vec(-2.0f64..2.0, 8),
        c in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let av = Var::constant(tensor(&[3, 4], a));
        let (bv, cv) = (Var::constant(tensor(&[4, 2], b)), Var::constant(tensor(&[4, 2], c)));
        let lhs = av.matmul(&bv.add(&cv).unwrap()).unwrap();
        let rhs = av.matmul(&bv).unwrap().add(&av.matmul(&cv).unwrap()).unwrap();
        prop_assert!(lhs.value().max_abs_diff(rhs.value()) < 1e-12);
    }

    #[test]
    fn rope_preserves_token_norms(
        values in prop::collection::vec(-3.0f64..3.0, 24),
        positions in prop::collection::vec(0usize..500, 4),
    ) {
        let x = tensor(&[4, 6], values);
        let y = rope_apply(&Var::constant(x.clone()), &positions, 10_000.0).unwrap();
        for (a, b) in x.data().chunks(6).zip(y.value().data().chunks(6)) {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((na - nb).abs() < 1e-5);
        }
    }

    #[test]
    fn standardization_round_trips(
        pixels in prop::collection::vec(0.0f32..1.0, 2 * 4 * 4 * 3),
    ) {
        let ds = Dataset::new(Tensor::new(&[2, 4, 4, 3], pixels).unwrap(), vec![0, 1], 2, Split::Train).unwrap();
        let st = Standardizer::fit(&ds);
        let mut t = ds.clone();
        st.apply(&mut t).unwrap();
        st.invert(&mut t).unwrap();
        prop_assert!(t.images.max_abs_diff(&ds.images) < 1e-5);
    }

    #[test]
    fn batch_order_partitions_every_index(n in 0usize..700, bs in 1usize..130, seed: u64, epoch in 0usize..5) {
        let order = batch_order(n, bs, seed, epoch, true);
        prop_assert_eq!(order.len(), n.div_ceil(bs));
        let mut all: Vec<usize> = order.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(order.iter().rev().skip(1).all(|b| b.len() == bs));
        prop_assert_eq!(order, batch_order(n, bs, seed, epoch, true));
    }

    #[test]
    fn moving_average_properties(
        series in prop::collection::vec(-5.0f64..5.0, 1..200),
        window in 1usize..50,
        level in -3.0f64..3.0,
    ) {
        let out = moving_average(&series, window).unwrap();
        prop_assert_eq!(out.len(), series.len());
        let k = window.min(series.len());
        let tail = series[series.len() - k..].iter().sum::<f64>() / k as f64;
        prop_assert!((out[out.len() - 1] - tail).abs() < 1e-9);
        prop_assert_eq!(moving_average(&series, 1).unwrap(), series.clone());
        let flat = moving_average(&vec![level; series.len()], window).unwrap();
        prop_assert!(flat.iter().all(|v| (v - level).abs() < 1e-12));
    }

    #[test]
    fn six_digit_formatting_parses_back(v in prop_oneof![-1e12f64..1e12, -1.0f64..1.0, 1e-9f64..1e-4]) {
        let s = fmt_sig(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-6 * v.abs() + 1e-300, "{} -> {}", v, s);
    }

    #[test]
    fn run_config_text_round_trips(lr in 1e-6f64..1e-1, epochs in 0usize..100, seed: u64, limit in prop::option::of(1usize..60_000)) {
        let mut c = RunConfig::defaults(ModelKind::Hrm, DatasetKind::Cifar10);
        c.lr = lr;
        c.epochs = epochs;
        c.seed = seed;
        c.train_limit = limit;
        prop_assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn idx_round_trip(n in 0usize..5, rows in 1usize..6, cols in 1usize..6, seed: u8) {
        let pixels: Vec<u8> = (0..n * rows * cols).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let mut img = Vec::new();
        for v in [2051u32, n as u32, rows as u32, cols as u32] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        img.extend_from_slice(&pixels);
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let mut lab = Vec::new();
        for v in [2049u32, n as u32] {
            lab.extend_from_slice(&v.to_be_bytes());
        }
        lab.extend_from_slice(&labels);
        let t = parse_idx_images(&img, Path::new("x")).unwrap();
        prop_assert_eq!(t.shape(), &[n, rows, cols, 1]);
        prop_assert!(t.data().iter().zip(&pixels).all(|(a, b)| *a == *b as f32 / 255.0));
        let l = parse_idx_labels(&lab, Path::new("y")).unwrap();
        prop_assert_eq!(l, labels.iter().map(|&v| v as usize).collect::<Vec<_>>());
        if n * rows * cols > 0 {
            prop_assert!(parse_idx_images(&img[..img.len() - 1], Path::new("x")).is_err());
        }
    }

    #[test]
    fn cifar_record_layout(label in 0u8..10, fine in 0u8..100, seed: u8) {
        let plane: Vec<u8> = (0..3072).map(|i| (i as u8).wrapping_add(seed)).collect();
        let mut rec10 = vec![label];
        rec10.extend_from_slice(&plane);
        let (mut im, mut lb) = (Vec::new(), Vec::new());
        parse_cifar(&rec10, CifarVariant::C10, Path::new("c"), &mut im, &mut lb).unwrap();
        prop_assert_eq!(&lb, &vec![label as usize]);
        // Pixel (row 1, col 2), green channel, comes from plane 1 at offset 32 + 2.
        prop_assert_eq!(im[(32 + 2) * 3 + 1], plane[1024 + 34] as f32 / 255.0);
        let mut rec100 = vec![3, fine];
        rec100.extend_from_slice(&plane);
        let (mut im, mut lb) = (Vec::new(), Vec::new());
        parse_cifar(&rec100, CifarVariant::C100, Path::new("c"), &mut im, &mut lb).unwrap();
        prop_assert_eq!(&lb, &vec![fine as usize]);
        prop_assert!(parse_cifar(&rec100[..100], CifarVariant::C100, Path::new("c"), &mut im, &mut lb).is_err());
    }
}
