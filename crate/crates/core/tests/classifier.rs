mod common;

use common::{checkpoint, gradient_check, random_window, tiny};

use mmg_teleop::classifier::{
    evaluate, gradient, init_params, loss, softmax, train, ModelCheckpoint, ModelConfig, TrainConfig,
};
use mmg_teleop::gesture::GestureClass;
use mmg_teleop::signal::{ChannelStats, SignalWindow};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_finite_differences() {
    let worst = gradient_check(tiny(1), 11);
    assert!(worst < 1e-3, "max relative error {worst}");
}

#[test]
fn gradient_matches_finite_differences_with_pooling() {
    let worst = gradient_check(tiny(4), 12);
    assert!(worst < 1e-3, "max relative error {worst}");
}

#[test]
fn duplicated_sample_has_single_sample_gradient() {
    let cfg = tiny(2);
    let params = init_params(&cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random_window(&mut rng, 5, 32);
    let weights = [1.0; 6];
    let (l1, g1) = gradient(&cfg, &params, &[(&w, 2)], &weights).unwrap();
    let (l2, g2) = gradient(&cfg, &params, &[(&w, 2), (&w, 2)], &weights).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);
}

#[test]
fn unused_dense_rows_get_softmax_gradient() {
    // Dense bias gradient for class k is mean(w_y (p_k - [k = y])).
    let cfg = tiny(1);
    let params = init_params(&cfg, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = random_window(&mut rng, 5, 32);
    let weights = [1.0; 6];
    let (_, g) = gradient(&cfg, &params, &[(&w, 0)], &weights).unwrap();
    let ckpt = checkpoint(cfg, params);
    let (probs, _) = ckpt.forward(&w).unwrap();
    let bias = ckpt.layout().dense_b;
    for k in 1..6 {
        let gk = g[bias.offset + k];
        assert!(gk > 0.0);
        assert!((gk - probs[k]).abs() < 1e-12);
    }
    assert!((g[bias.offset] - (probs[0] - 1.0)).abs() < 1e-12);
}

#[test]
fn zero_weights_give_uniform_probabilities() {
    let cfg = tiny(1);
    let ckpt = checkpoint(cfg, vec![0.0; cfg.param_count()]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (probs, logits) = ckpt.forward(&random_window(&mut rng, 5, 32)).unwrap();
    assert!(logits.iter().all(|&z| z == 0.0));
    for p in probs {
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
    }
}

#[test]
fn softmax_hand_values() {
    let p = softmax(&[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let e2 = 2f64.exp();
    assert!((p[0] - e2 / (e2 + 5.0)).abs() < 1e-15);
    assert!((p[0] - 0.59642).abs() < 1e-5);
    for q in softmax(&[1.0; 6]) {
        assert!((q - 1.0 / 6.0).abs() < 1e-15);
    }
    // Large logits do not overflow.
    let big = softmax(&[1000.0, 999.0]);
    assert!((big[0] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-12);
}

#[test]
fn loss_hand_values() {
    let w = [1.0, 2.0];
    assert_eq!(loss(&[vec![1.0, 0.0]], &[0], &w), 0.0);
    let sixth = vec![1.0 / 6.0; 2];
    assert!((loss(std::slice::from_ref(&sixth), &[0], &w) - 6f64.ln()).abs() < 1e-12);
    assert!((6f64.ln() - 1.7918).abs() < 1e-4);
    assert!((loss(&[sixth], &[1], &w) - 2.0 * 6f64.ln()).abs() < 1e-12);
    // Zero probability is clamped.
    assert!((loss(&[vec![1.0, 0.0]], &[1], &[1.0, 1.0]) + 1e-12f64.ln()).abs() < 1e-9);
}

proptest! {
    #[test]
    fn softmax_invariances(z in proptest::collection::vec(-30.0f64..30.0, 6), shift in -100.0f64..100.0) {
        let p = softmax(&z);
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let q = softmax(&shifted);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(*a > 0.0 && *a <= 1.0);
        }
        let am = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
        prop_assert_eq!(am(&p), am(&z));
    }
}

#[test]
fn forward_rejects_wrong_shape() {
    let cfg = tiny(1);
    let ckpt = checkpoint(cfg, init_params(&cfg, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(ckpt.forward(&random_window(&mut rng, 5, 31)).is_err());
    assert!(ckpt.forward(&random_window(&mut rng, 4, 32)).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let cfg = tiny(2);
    let mut stats = ChannelStats::identity(5);
    stats.mean = vec![128.0, 127.5, 129.25, 128.125, 130.0];
    stats.std = vec![3.1, 2.9, 4.0, 3.3, 1.0];
    stats.degenerate[4] = true;
    let ckpt = ModelCheckpoint::new(
        cfg,
        init_params(&cfg, 9),
        stats,
        GestureClass::ALL.to_vec(),
        None,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    ckpt.save(&path).unwrap();
    let loaded = ModelCheckpoint::load(&path).unwrap();
    assert_eq!(loaded, ckpt);
    assert_eq!(loaded.to_bytes(), ckpt.to_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = random_window(&mut rng, 5, 32);
    let a = ckpt.forward(&w).unwrap().1;
    let b = loaded.forward(&w).unwrap().1;
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn checkpoint_rejects_corruption() {
    let cfg = tiny(2);
    let ckpt = checkpoint(cfg, init_params(&cfg, 9));
    let bytes = ckpt.to_bytes();
    assert!(ModelCheckpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(ModelCheckpoint::from_bytes(&bad).is_err());
    // Flipping an architecture field breaks the config hash.
    let mut bad = bytes.clone();
    bad[12 + 4 * 6] ^= 1;
    assert!(ModelCheckpoint::from_bytes(&bad).is_err());
    let mut long = bytes;
    long.push(0);
    assert!(ModelCheckpoint::from_bytes(&long).is_err());
}

/// Two classes separated by the sign of channel 0.
fn toy_set(n: usize, seed: u64) -> Vec<SignalWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = i % 2;
            let sign = if class == 0 { 1.0 } else { -1.0 };
            let samples = (0..5)
                .map(|c| {
                    (0..32)
                        .map(|_| {
                            let noise: f64 = rng.random_range(-0.5..0.5);
                            if c == 0 {
                                sign + noise
                            } else {
                                noise
                            }
                        })
                        .collect()
                })
                .collect();
            SignalWindow::new(samples, 2600.0, 0, Some(GestureClass::ALL[class])).unwrap()
        })
        .collect()
}

fn toy_config() -> (ModelConfig, TrainConfig) {
    let model = ModelConfig {
        classes: 2,
        ..tiny(4)
    };
    let train = TrainConfig {
        epochs: 50,
        batch_size: 8,
        learning_rate: 1e-2,
        smoothing: None,
        validation_fraction: 0.0,
        early_stop_patience: 0,
        seed: 4,
        ..TrainConfig::default()
    };
    (model, train)
}

#[test]
fn toy_problem_is_learned() {
    let (model, cfg) = toy_config();
    let data = toy_set(40, 1);
    let (ckpt, log) = train(&model, &cfg, &data, &GestureClass::ALL[..2]).unwrap();
    let eval = evaluate(&ckpt, &data).unwrap();
    assert_eq!(eval.accuracy, 1.0, "log: {:?}", log.epochs.last());
}

#[test]
fn training_is_deterministic() {
    let (model, mut cfg) = toy_config();
    cfg.epochs = 5;
    cfg.validation_fraction = 0.2;
    let data = toy_set(40, 2);
    let (a, la) = train(&model, &cfg, &data, &GestureClass::ALL[..2]).unwrap();
    let (b, lb) = train(&model, &cfg, &data, &GestureClass::ALL[..2]).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(la, lb);
}

#[test]
fn class_weights_follow_imbalance() {
    let (model, mut cfg) = toy_config();
    cfg.epochs = 2;
    let data: Vec<SignalWindow> = toy_set(40, 3)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0 || i % 8 == 1)
        .map(|(_, w)| w)
        .collect();
    let n0 = data.iter().filter(|w| w.label == Some(GestureClass::ALL[0])).count() as f64;
    let n1 = data.len() as f64 - n0;
    assert!(n0 > 2.0 * n1);
    let (_, log) = train(&model, &cfg, &data, &GestureClass::ALL[..2]).unwrap();
    let n = data.len() as f64;
    assert!((log.class_weights[0] - n / (2.0 * n0)).abs() < 1e-12);
    assert!((log.class_weights[1] - n / (2.0 * n1)).abs() < 1e-12);
    assert!(log.class_weights[1] > log.class_weights[0]);

    // Explicit weights change the optimization path.
    cfg.class_weights = Some(vec![1.0, 1.0]);
    let (flat, _) = train(&model, &cfg, &data, &GestureClass::ALL[..2]).unwrap();
    cfg.class_weights = None;
    let (weighted, _) = train(&model, &cfg, &data, &GestureClass::ALL[..2]).unwrap();
    assert_ne!(flat.params(), weighted.params());
}

#[test]
fn non_finite_input_names_a_tensor() {
    let (model, mut cfg) = toy_config();
    cfg.learning_rate = 1e300;
    cfg.grad_clip = 0.0;
    cfg.epochs = 3;
    let data = toy_set(16, 4);
    match train(&model, &cfg, &data, &GestureClass::ALL[..2]) {
        Err(mmg_teleop::Error::NonFinite { tensor, .. }) => {
            assert!(tensor.contains("conv") || tensor.contains("lstm") || tensor.contains("dense"), "{tensor}")
        }
        other => panic!("expected non-finite error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn evaluate_rejects_empty_set() {
    let cfg = tiny(1);
    let ckpt = checkpoint(cfg, init_params(&cfg, 1));
    assert!(evaluate(&ckpt, &[]).is_err());
}
