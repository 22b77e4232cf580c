//! Mini-batch training with Adam and plateau learning-rate halving.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{argmax, ModelCheckpoint};
use super::network::{self, batch_gradient, Layout};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::rng::rng_for;
use crate::signal::{normalize, savitzky_golay, ChannelStats, FilterSpec, SignalWindow};

/// Samples per parallel gradient task. Fixed so the reduction order, and
/// therefore the result, never depends on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without validation improvement before the rate is halved.
    pub plateau_patience: usize,
    pub lr_decay: f64,
    pub min_learning_rate: f64,
    /// Stop after this many epochs without improvement; 0 disables.
    pub early_stop_patience: usize,
    /// Share of each class held out from training for checkpoint selection.
    pub validation_fraction: f64,
    /// Per-class loss weights; inverse class frequency when absent.
    pub class_weights: Option<Vec<f64>>,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Savitzky-Golay smoothing applied to every window before normalization.
    pub smoothing: Option<FilterSpec>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            plateau_patience: 5,
            lr_decay: 0.5,
            min_learning_rate: 1e-6,
            early_stop_patience: 40,
            validation_fraction: 0.125,
            class_weights: None,
            grad_clip: 5.0,
            smoothing: Some(FilterSpec::default()),
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("learning rate must be positive and betas in [0, 1)".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(Error::Config(format!("lr_decay {} must lie in (0, 1)", self.lr_decay)));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must lie in [0, 0.5)".into()));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != classes || w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!("need {classes} positive finite class weights")));
            }
        }
        if let Some(s) = &self.smoothing {
            s.validate_smoothing()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingLog {
    pub param_count: usize,
    pub class_weights: Vec<f64>,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_summary(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "parameters: {}", self.param_count)?;
        writeln!(out, "best epoch: {}", self.best_epoch)?;
        if let Some(e) = self.epochs.iter().find(|e| e.epoch == self.best_epoch) {
            writeln!(out, "best val loss: {:.6}  val accuracy: {:.4}", e.val_loss, e.val_accuracy)?;
        }
        Ok(())
    }
}

/// `N / (K n_k)`: equal to 1 for a balanced set. Absent classes get 1.
pub fn class_weights_inverse_frequency(targets: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &t in targets {
        counts[t] += 1;
    }
    let n = targets.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 1.0 } else { n / (classes as f64 * c as f64) })
        .collect()
}

/// Glorot-uniform weights, zero biases, forget-gate biases at 1.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Vec<f64> {
    let layout = Layout::new(cfg);
    let mut p = vec![0.0; layout.len];
    let mut rng = rng_for(seed, &[0x1417]);
    let mut fill = |p: &mut [f64], fan_in: usize, fan_out: usize| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in p {
            *v = rng.random_range(-a..a);
        }
    };
    let h = cfg.lstm_hidden;
    fill(
        &mut p[layout.conv_w.range()],
        cfg.channels * cfg.kernel,
        cfg.conv_filters * cfg.kernel,
    );
    for s in &layout.layers {
        fill(&mut p[s.w_ih.range()], s.input, 4 * h);
        fill(&mut p[s.w_hh.range()], h, 4 * h);
        for v in &mut p[s.bias.offset + h..s.bias.offset + 2 * h] {
            *v = 1.0;
        }
    }
    fill(&mut p[layout.dense_w.range()], h, cfg.classes);
    p
}

fn check_input(cfg: &ModelConfig, w: &SignalWindow) -> Result<()> {
    if w.channels() != cfg.channels || w.len() != cfg.window_len {
        return Err(Error::Shape {
            expected: format!("{} x {}", cfg.channels, cfg.window_len),
            actual: format!("{} x {}", w.channels(), w.len()),
        });
    }
    Ok(())
}

/// Batch-mean weighted cross-entropy and its exact gradient for normalized
/// windows with target class indices.
pub fn gradient(
    cfg: &ModelConfig,
    params: &[f64],
    batch: &[(&SignalWindow, usize)],
    class_weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::RejectedInput("empty batch".into()));
    }
    let layout = Layout::new(cfg);
    if params.len() != layout.len {
        return Err(Error::RejectedInput(format!(
            "{} parameters for an architecture of {}",
            params.len(),
            layout.len
        )));
    }
    if class_weights.len() != cfg.classes {
        return Err(Error::RejectedInput("class weight count differs from class count".into()));
    }
    let mut inputs = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for (w, t) in batch {
        check_input(cfg, w)?;
        if *t >= cfg.classes {
            return Err(Error::RejectedInput(format!("target {t} out of range")));
        }
        inputs.push(w.samples().concat());
        targets.push(*t);
    }
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    Ok(batch_gradient(cfg, &layout, params, &refs, &targets, class_weights))
}

/// Loss and gradient of a batch, computed in fixed-size parallel chunks and
/// summed in chunk order.
fn parallel_gradient(
    cfg: &ModelConfig,
    layout: &Layout,
    params: &[f64],
    inputs: &[&[f64]],
    targets: &[usize],
    weights: &[f64],
) -> (f64, Vec<f64>) {
    let n = inputs.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = inputs
        .par_chunks(GRAD_CHUNK)
        .zip(targets.par_chunks(GRAD_CHUNK))
        .map(|(x, t)| {
            let (loss, grad) = batch_gradient(cfg, layout, params, x, t, weights);
            // Rescale chunk means to contributions to the full-batch mean.
            let share = x.len() as f64 / n;
            (loss * share, grad.into_iter().map(|g| g * share).collect())
        })
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; layout.len];
    for (l, g) in parts {
        total += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (total, grad)
}

fn first_non_finite(cfg: &ModelConfig, layout: &Layout, values: &[f64], what: &str) -> Option<String> {
    layout
        .tensors(cfg)
        .into_iter()
        .find(|(_, _, span)| values[span.range()].iter().any(|v| !v.is_finite()))
        .map(|(name, _, _)| format!("{what} {name}"))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Stratified, seeded split of sample indices into (train, validation).
fn split_validation(targets: &[usize], classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for k in 0..classes {
        let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == k).collect();
        idx.shuffle(&mut rng_for(seed, &[0x5a11, k as u64]));
        let n_val = if fraction > 0.0 && idx.len() >= 2 {
            ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1)
        } else {
            0
        };
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Trains from labeled raw windows. `labels` fixes the output class order.
/// Returns the checkpoint with the best validation accuracy (lowest
/// validation loss among ties).
pub fn train(
    model: &ModelConfig,
    cfg: &TrainConfig,
    windows: &[SignalWindow],
    labels: &[GestureClass],
) -> Result<(ModelCheckpoint, TrainingLog)> {
    model.validate()?;
    cfg.validate(model.classes)?;
    if labels.len() != model.classes {
        return Err(Error::Config(format!(
            "{} labels for {} classes",
            labels.len(),
            model.classes
        )));
    }
    if windows.is_empty() {
        return Err(Error::RejectedInput("training set is empty".into()));
    }
    let mut targets = Vec::with_capacity(windows.len());
    for w in windows {
        check_input(model, w)?;
        let label = w
            .label
            .ok_or_else(|| Error::RejectedInput("training window has no label".into()))?;
        let t = labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| Error::RejectedInput(format!("label {label} is not a model class")))?;
        targets.push(t);
    }

    let smoothed: Vec<SignalWindow> = match &cfg.smoothing {
        Some(spec) => windows
            .par_iter()
            .map(|w| w.map_channels(|_, x| savitzky_golay(x, spec)))
            .collect::<Result<_>>()?,
        None => windows.to_vec(),
    };

    let weights = cfg
        .class_weights
        .clone()
        .unwrap_or_else(|| class_weights_inverse_frequency(&targets, model.classes));
    let (train_idx, val_idx) = split_validation(&targets, model.classes, cfg.validation_fraction, cfg.seed);
    let train_windows: Vec<SignalWindow> = train_idx.iter().map(|&i| smoothed[i].clone()).collect();
    let stats = ChannelStats::from_windows(&train_windows)?;
    let inputs: Vec<Vec<f64>> = smoothed
        .iter()
        .map(|w| normalize(w, &stats).map(|n| n.samples().concat()))
        .collect::<Result<_>>()?;
    // Without a validation split, selection falls back to the training set.
    let select_idx = if val_idx.is_empty() { train_idx.clone() } else { val_idx.clone() };

    let layout = Layout::new(model);
    let mut params = init_params(model, cfg.seed);
    let mut adam = Adam::new(layout.len);
    let mut lr = cfg.learning_rate;
    // Kept weights: highest validation accuracy, ties to lower loss.
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, params.clone(), 0usize);
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0usize;
    let mut plateau = 0usize;
    let mut epochs = Vec::new();
    log::info!(
        "training {} parameters on {} windows ({} held out)",
        layout.len,
        train_idx.len(),
        val_idx.len()
    );

    for epoch in 1..=cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng_for(cfg.seed, &[0xe90c, epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let t: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let (loss, mut grad) = parallel_gradient(model, &layout, &params, &x, &t, &weights);
            if !loss.is_finite() {
                let tensor = first_non_finite(model, &layout, &params, "parameter")
                    .or_else(|| first_non_finite(model, &layout, &grad, "gradient of"))
                    .unwrap_or_else(|| "input batch".to_string());
                return Err(Error::NonFinite { epoch, tensor });
            }
            if let Some(tensor) = first_non_finite(model, &layout, &grad, "gradient of") {
                return Err(Error::NonFinite { epoch, tensor });
            }
            if cfg.grad_clip > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cfg.grad_clip {
                    let s = cfg.grad_clip / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            adam.step(&mut params, &grad, lr, cfg);
            epoch_loss += loss * batch.len() as f64;
        }
        let train_loss = epoch_loss / train_idx.len() as f64;

        let scored: Vec<(f64, bool)> = select_idx
            .par_iter()
            .map(|&i| {
                let acts = network::forward(model, &layout, &params, &inputs[i]);
                let probs = network::softmax(&acts.logits);
                let y = targets[i];
                (network::sample_loss(&probs, y, weights[y]), argmax(&probs) == y)
            })
            .collect();
        let val_loss = scored.iter().map(|s| s.0).sum::<f64>() / scored.len() as f64;
        let val_accuracy = scored.iter().filter(|s| s.1).count() as f64 / scored.len() as f64;
        log::info!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4} acc {val_accuracy:.3} lr {lr:.2e}");
        epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
            learning_rate: lr,
        });

        if val_accuracy > best.0 || (val_accuracy == best.0 && val_loss < best.1) {
            best = (val_accuracy, val_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            plateau = 0;
        } else {
            plateau += 1;
            if plateau >= cfg.plateau_patience {
                lr = (lr * cfg.lr_decay).max(cfg.min_learning_rate);
                plateau = 0;
            }
        }
        if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
            break;
        }
    }

    let (_, _, best_params, best_epoch) = best;
    let ckpt = ModelCheckpoint::new(*model, best_params, stats, labels.to_vec(), cfg.smoothing)?;
    let log = TrainingLog {
        param_count: layout.len,
        class_weights: weights,
        epochs,
        best_epoch,
    };
    Ok((ckpt, log))
}
