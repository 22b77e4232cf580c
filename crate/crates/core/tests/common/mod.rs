//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use mmg_teleop::classifier::{gradient, init_params, ModelCheckpoint, ModelConfig};
use mmg_teleop::control::{ButtonEvent, ButtonParams, Mode, Press};
use mmg_teleop::gesture::GestureClass;
use mmg_teleop::signal::{ChannelStats, SignalWindow};
use mmg_teleop::sim::{PathSpec, Point};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference semantics written over the whole history: pair each press (while
/// up) with the next release; a pair held for `hold_ms` selects movement, a
/// short pair that follows a short, non-double pair within `double_gap_ms`
/// selects grasp.
pub fn reference_mode(events: &[ButtonEvent], p: &ButtonParams) -> Mode {
    let mut pairs: Vec<(i64, i64)> = Vec::new();
    let mut down: Option<i64> = None;
    for e in events {
        match (down, e.kind) {
            (None, Press::Press) => down = Some(e.t_ms),
            (Some(t), Press::Release) => {
                pairs.push((t, e.t_ms));
                down = None;
            }
            _ => {}
        }
    }
    let mut mode = Mode::Idle;
    let mut double = vec![false; pairs.len()];
    for i in 0..pairs.len() {
        let press = pairs[i].0;
        let short = |j: usize| pairs[j].1 - pairs[j].0 < p.hold_ms;
        if !short(i) {
            mode = Mode::Movement;
        } else if i > 0 && short(i - 1) && !double[i - 1] && press - pairs[i - 1].1 <= p.double_gap_ms {
            double[i] = true;
            mode = Mode::Grasp;
        }
    }
    mode
}

/// CRC-16/CCITT-FALSE, bit by bit.
pub fn crc16_oracle(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in data {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

pub fn oracle_distance(p: Point, path: &PathSpec) -> f64 {
    let p = Vector2::new(p.x, p.y);
    path.segments()
        .map(|(a, b)| {
            let a = Vector2::new(a.x, a.y);
            let ab = Vector2::new(b.x, b.y) - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (p - (a + ab * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn tiny(pool: usize) -> ModelConfig {
    ModelConfig {
        channels: 5,
        window_len: 32,
        conv_filters: 4,
        kernel: 5,
        pool,
        lstm_layers: 2,
        lstm_hidden: 8,
        classes: 6,
    }
}

pub fn random_window(rng: &mut ChaCha8Rng, channels: usize, len: usize) -> SignalWindow {
    let samples = (0..channels)
        .map(|_| (0..len).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    SignalWindow::new(samples, 2600.0, 0, None).unwrap()
}

pub fn checkpoint(cfg: ModelConfig, params: Vec<f64>) -> ModelCheckpoint {
    let labels = GestureClass::ALL[..cfg.classes].to_vec();
    ModelCheckpoint::new(cfg, params, ChannelStats::identity(cfg.channels), labels, None).unwrap()
}

/// Batch loss recomputed from forward outputs only.
pub fn oracle_loss(cfg: ModelConfig, params: &[f64], batch: &[(&SignalWindow, usize)], weights: &[f64]) -> f64 {
    let ckpt = checkpoint(cfg, params.to_vec());
    let mut total = 0.0;
    for (w, y) in batch {
        let (probs, _) = ckpt.forward(w).unwrap();
        total += -weights[*y] * probs[*y].ln();
    }
    total / batch.len() as f64
}

/// Smallest |conv output| before the ReLU. Central differences straddle the
/// kink when this is below the step size, so such inputs are resampled.
pub fn min_abs_preactivation(w: &[f64], b: &[f64], kernel: usize, x: &SignalWindow) -> f64 {
    let pad = (kernel - 1) as isize / 2;
    let len = x.len() as isize;
    let mut min = f64::INFINITY;
    for (f, bias) in b.iter().enumerate() {
        for t in 0..len {
            let mut acc = *bias;
            for c in 0..x.channels() {
                for k in 0..kernel as isize {
                    let i = t + k - pad;
                    if (0..len).contains(&i) {
                        acc += w[(f * x.channels() + c) * kernel + k as usize] * x.channel(c)[i as usize];
                    }
                }
            }
            min = min.min(acc.abs());
        }
    }
    min
}

pub fn gradient_check(cfg: ModelConfig, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_params(&cfg, seed);
    // Nonzero biases so every code path carries signal.
    for v in params.iter_mut() {
        *v += rng.random_range(-0.05..0.05);
    }
    let conv_w = &params[..cfg.conv_filters * 5 * cfg.kernel];
    let conv_b = &params[conv_w.len()..conv_w.len() + cfg.conv_filters];
    let windows: Vec<SignalWindow> = (0..3)
        .map(|_| loop {
            let w = random_window(&mut rng, 5, 32);
            if min_abs_preactivation(conv_w, conv_b, cfg.kernel, &w) > 1e-3 {
                break w;
            }
        })
        .collect();
    let batch: Vec<(&SignalWindow, usize)> = windows.iter().zip([0, 3, 5]).collect();
    let weights = [1.0, 0.5, 2.0, 1.5, 0.8, 1.2];
    let (l, analytic) = gradient(&cfg, &params, &batch, &weights).unwrap();
    assert!((l - oracle_loss(cfg, &params, &batch, &weights)).abs() < 1e-12);
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + eps;
        let up = oracle_loss(cfg, &params, &batch, &weights);
        params[i] = orig - eps;
        let down = oracle_loss(cfg, &params, &batch, &weights);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        // Relative error, with an absolute floor for gradients that are
        // numerically zero.
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
