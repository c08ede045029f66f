use std::f64::consts::SQRT_2;

use ofnn::cli::{decode_params, parse_pairs};
use ofnn::data::{
    parse_har2_features, parse_har2_labels, parse_idx_images, parse_idx_labels, PermutationSpec,
};
use ofnn::model::{
    forward, forward_with, make_channels, InputMode, ModelConfig, Params, Reduction,
};
use ofnn::Matrix;
use proptest::prelude::*;

fn config_strategy() -> impl Strategy<Value = ModelConfig> {
    (
        1usize..4,
        1usize..5,
        1usize..6,
        0.5f64..8.0,
        2usize..80,
        2usize..4,
        any::<bool>(),
    )
        .prop_map(|(m, n, c, f, len, d, conv)| ModelConfig {
            input_dim: m,
            hidden_dim: n,
            num_channels: c,
            base_freq: f,
            seq_len: len,
            output_dim: d,
            input_mode: if conv {
                InputMode::Conv1D {
                    window: 2.min(len),
                    stride: 1,
                }
            } else {
                InputMode::FullyConnected
            },
        })
}

fn case() -> impl Strategy<Value = (ModelConfig, u64, Vec<f64>)> {
    config_strategy().prop_flat_map(|cfg| {
        let k = cfg.seq_len * cfg.input_dim;
        (
            Just(cfg),
            any::<u64>(),
            prop::collection::vec(-1.0f64..1.0, k),
        )
    })
}

fn seq(cfg: &ModelConfig, values: &[f64], scale: f64) -> Matrix {
    Matrix::from_vec(
        cfg.seq_len,
        cfg.input_dim,
        values.iter().map(|v| v * scale).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dc_channel_is_mean_of_sin_plus_cos((cfg, seed, xs) in case()) {
        let ch = make_channels(&cfg).unwrap();
        let p = Params::init(&cfg, seed);
        let (_, cache) = forward(&p, &ch, &seq(&cfg, &xs, 1.0), &cfg).unwrap();
        let steps = cache.phis.rows();
        for j in 0..cfg.hidden_dim {
            let want: f64 = (0..steps).map(|t| {
                let phi = cache.phis.get(t, j);
                phi.sin() + phi.cos()
            }).sum::<f64>() / steps as f64;
            prop_assert!((cache.h_final.get(0, j) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn hidden_states_stay_bounded_for_huge_inputs((cfg, seed, xs) in case()) {
        let ch = make_channels(&cfg).unwrap();
        let p = Params::init(&cfg, seed);
        let (y, cache) = forward(&p, &ch, &seq(&cfg, &xs, 1e6), &cfg).unwrap();
        prop_assert!(y.iter().all(|v| v.is_finite()));
        for c in 0..cfg.num_channels {
            let bound = if c == 0 { SQRT_2 } else { 1.0 } + 1e-12;
            prop_assert!(cache.h_final.row(c).iter().all(|h| h.abs() <= bound));
        }
    }

    #[test]
    fn dc_channel_ignores_timestep_order((cfg, seed, xs) in case(), rot in 0usize..100) {
        let cfg = ModelConfig { input_mode: InputMode::FullyConnected, ..cfg };
        let ch = make_channels(&cfg).unwrap();
        let p = Params::init(&cfg, seed);
        let a = seq(&cfg, &xs, 1.0);
        let shift = rot % cfg.seq_len;
        let b = Matrix::from_fn(cfg.seq_len, cfg.input_dim, |r, c| a.get((r + shift) % cfg.seq_len, c));
        let (_, ca) = forward(&p, &ch, &a, &cfg).unwrap();
        let (_, cb) = forward(&p, &ch, &b, &cfg).unwrap();
        for (x, y) in ca.h_final.row(0).iter().zip(cb.h_final.row(0)) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic_across_reductions((cfg, seed, xs) in case()) {
        let ch = make_channels(&cfg).unwrap();
        let p = Params::init(&cfg, seed);
        let s = seq(&cfg, &xs, 1.0);
        let (a, _) = forward_with(&p, &ch, &s, &cfg, Reduction::Sequential).unwrap();
        let (b, _) = forward_with(&p, &ch, &s, &cfg, Reduction::Sequential).unwrap();
        let (c, _) = forward_with(&p, &ch, &s, &cfg, Reduction::Parallel).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
            prop_assert_eq!(x.to_bits(), z.to_bits());
        }
    }

    #[test]
    fn parsers_reject_garbage_without_panicking(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_idx_images(&bytes);
        let _ = parse_idx_labels(&bytes);
        let _ = decode_params(&bytes);
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_har2_features(&text);
        let _ = parse_har2_labels(&text);
        let _ = parse_pairs(&text);
        let _ = PermutationSpec::parse(&text, 0);
    }

    #[test]
    fn permutation_inverse_round_trips(seed in any::<u64>(), len in 1usize..300) {
        let p = PermutationSpec::from_seed(seed, len);
        prop_assert!(p.is_bijection());
        let back = PermutationSpec::parse(&p.to_text(), seed).unwrap();
        prop_assert_eq!(&back, &p);
        let inv = p.inverse();
        for (i, &j) in p.perm.iter().enumerate() {
            prop_assert_eq!(inv.perm[j], i);
        }
    }
}
