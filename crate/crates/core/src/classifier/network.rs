//! CNN-LSTM forward and backward passes over a flat parameter vector.
//!
//! Data flow for one window `[channels][T]`:
//! conv1d (stride 1, same padding) -> ReLU -> max pool (`pool` steps) ->
//! stacked LSTM over the time-major sequence -> final hidden state of the top
//! layer -> dense -> logits.
//!
//! LSTM gate order inside each `4H` block is input, forget, cell, output.

use super::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
}

impl Span {
    pub fn range(self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmSpans {
    pub w_ih: Span,
    pub w_hh: Span,
    pub bias: Span,
    pub input: usize,
}

/// Where each tensor lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub conv_w: Span,
    pub conv_b: Span,
    pub layers: Vec<LstmSpans>,
    pub dense_w: Span,
    pub dense_b: Span,
    pub len: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut offset = 0;
        let mut take = |len: usize| {
            let s = Span { offset, len };
            offset += len;
            s
        };
        let h = cfg.lstm_hidden;
        let conv_w = take(cfg.conv_filters * cfg.channels * cfg.kernel);
        let conv_b = take(cfg.conv_filters);
        let layers = (0..cfg.lstm_layers)
            .map(|l| {
                let input = if l == 0 { cfg.conv_filters } else { h };
                LstmSpans {
                    w_ih: take(4 * h * input),
                    w_hh: take(4 * h * h),
                    bias: take(4 * h),
                    input,
                }
            })
            .collect();
        let dense_w = take(cfg.classes * h);
        let dense_b = take(cfg.classes);
        Layout {
            conv_w,
            conv_b,
            layers,
            dense_w,
            dense_b,
            len: offset,
        }
    }

    /// `(name, shape, span)` for every tensor, in storage order.
    pub fn tensors(&self, cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Span)> {
        let h = cfg.lstm_hidden;
        let mut out = vec![
            ("conv.weight".to_string(), vec![cfg.conv_filters, cfg.channels, cfg.kernel], self.conv_w),
            ("conv.bias".to_string(), vec![cfg.conv_filters], self.conv_b),
        ];
        for (l, s) in self.layers.iter().enumerate() {
            out.push((format!("lstm.{l}.w_ih"), vec![4 * h, s.input], s.w_ih));
            out.push((format!("lstm.{l}.w_hh"), vec![4 * h, h], s.w_hh));
            out.push((format!("lstm.{l}.bias"), vec![4 * h], s.bias));
        }
        out.push(("dense.weight".to_string(), vec![cfg.classes, h], self.dense_w));
        out.push(("dense.bias".to_string(), vec![cfg.classes], self.dense_b));
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Smallest probability fed to the logarithm of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Weighted cross-entropy of one sample: `-w_y ln p_y`.
pub fn sample_loss(probs: &[f64], target: usize, weight: f64) -> f64 {
    -weight * probs[target].max(PROB_FLOOR).ln()
}

/// Batch-mean weighted cross-entropy.
pub fn loss(probs: &[Vec<f64>], targets: &[usize], class_weights: &[f64]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(targets)
        .map(|(p, &y)| sample_loss(p, y, class_weights[y]))
        .sum();
    total / probs.len() as f64
}

struct LayerActs {
    /// `[S + 1][H]`, row 0 is the zero initial state.
    h: Vec<f64>,
    c: Vec<f64>,
    /// `[S][4H]` post-activation gates.
    gates: Vec<f64>,
}

pub(crate) struct Activations {
    /// `[F][T]` post-ReLU conv output.
    conv: Vec<f64>,
    /// `[S][F]` pooled sequence fed to the first LSTM layer.
    seq: Vec<f64>,
    /// `[S][F]` time index that won each pool.
    argmax: Vec<usize>,
    layers: Vec<LayerActs>,
    pub logits: Vec<f64>,
}

/// `input` is channel-major `[channels][T]` flattened.
pub(crate) fn forward(cfg: &ModelConfig, layout: &Layout, p: &[f64], input: &[f64]) -> Activations {
    let t_len = cfg.window_len;
    let f_len = cfg.conv_filters;
    let k_len = cfg.kernel;
    let pad = (k_len - 1) / 2;
    let w = &p[layout.conv_w.range()];
    let b = &p[layout.conv_b.range()];

    let mut conv = vec![0.0; f_len * t_len];
    for f in 0..f_len {
        let out = &mut conv[f * t_len..(f + 1) * t_len];
        out.fill(b[f]);
        for c in 0..cfg.channels {
            let x = &input[c * t_len..(c + 1) * t_len];
            for k in 0..k_len {
                let wk = w[(f * cfg.channels + c) * k_len + k];
                // out[t] += wk * x[t + k - pad] for valid indices.
                let lo = pad.saturating_sub(k);
                let hi = (t_len + pad - k).min(t_len);
                if lo >= hi {
                    continue;
                }
                let xs = &x[lo + k - pad..hi + k - pad];
                for (o, xv) in out[lo..hi].iter_mut().zip(xs) {
                    *o += wk * xv;
                }
            }
        }
        for v in out.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    let steps = cfg.seq_len();
    let pool = cfg.pool;
    let mut seq = vec![0.0; steps * f_len];
    let mut argmax = vec![0usize; steps * f_len];
    for f in 0..f_len {
        let row = &conv[f * t_len..(f + 1) * t_len];
        for s in 0..steps {
            let mut best = s * pool;
            for t in s * pool + 1..(s + 1) * pool {
                if row[t] > row[best] {
                    best = t;
                }
            }
            seq[s * f_len + f] = row[best];
            argmax[s * f_len + f] = best;
        }
    }

    let h_len = cfg.lstm_hidden;
    let mut layers: Vec<LayerActs> = Vec::with_capacity(cfg.lstm_layers);
    for (l, spans) in layout.layers.iter().enumerate() {
        let in_len = spans.input;
        let w_ih = &p[spans.w_ih.range()];
        let w_hh = &p[spans.w_hh.range()];
        let bias = &p[spans.bias.range()];
        let mut acts = LayerActs {
            h: vec![0.0; (steps + 1) * h_len],
            c: vec![0.0; (steps + 1) * h_len],
            gates: vec![0.0; steps * 4 * h_len],
        };
        let mut z = vec![0.0; 4 * h_len];
        for s in 0..steps {
            let x: &[f64] = if l == 0 {
                &seq[s * in_len..(s + 1) * in_len]
            } else {
                &layers[l - 1].h[(s + 1) * h_len..(s + 2) * h_len]
            };
            let h_prev = &acts.h[s * h_len..(s + 1) * h_len];
            for r in 0..4 * h_len {
                let wi = &w_ih[r * in_len..(r + 1) * in_len];
                let wh = &w_hh[r * h_len..(r + 1) * h_len];
                z[r] = bias[r] + dot(wi, x) + dot(wh, h_prev);
            }
            let gates = &mut acts.gates[s * 4 * h_len..(s + 1) * 4 * h_len];
            for j in 0..h_len {
                gates[j] = sigmoid(z[j]);
                gates[h_len + j] = sigmoid(z[h_len + j]);
                gates[2 * h_len + j] = z[2 * h_len + j].tanh();
                gates[3 * h_len + j] = sigmoid(z[3 * h_len + j]);
            }
            for j in 0..h_len {
                let (i, f, g, o) = (gates[j], gates[h_len + j], gates[2 * h_len + j], gates[3 * h_len + j]);
                let c_new = f * acts.c[s * h_len + j] + i * g;
                acts.c[(s + 1) * h_len + j] = c_new;
                acts.h[(s + 1) * h_len + j] = o * c_new.tanh();
            }
        }
        layers.push(acts);
    }

    let top = layers.last().expect("at least one LSTM layer");
    let h_final = &top.h[steps * h_len..(steps + 1) * h_len];
    let dw = &p[layout.dense_w.range()];
    let db = &p[layout.dense_b.range()];
    let logits = (0..cfg.classes)
        .map(|k| db[k] + dot(&dw[k * h_len..(k + 1) * h_len], h_final))
        .collect();

    Activations {
        conv,
        seq,
        argmax,
        layers,
        logits,
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Accumulates into `grad` the gradient of a loss whose derivative with
/// respect to the logits is `dlogits`.
pub(crate) fn backward(
    cfg: &ModelConfig,
    layout: &Layout,
    p: &[f64],
    input: &[f64],
    acts: &Activations,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let steps = cfg.seq_len();
    let h_len = cfg.lstm_hidden;

    // Dense layer.
    let top = acts.layers.last().expect("at least one LSTM layer");
    let h_final = &top.h[steps * h_len..(steps + 1) * h_len];
    let dw = &p[layout.dense_w.range()];
    let mut dh_final = vec![0.0; h_len];
    for k in 0..cfg.classes {
        let g = dlogits[k];
        grad[layout.dense_b.offset + k] += g;
        let row = layout.dense_w.offset + k * h_len;
        axpy(g, h_final, &mut grad[row..row + h_len]);
        axpy(g, &dw[k * h_len..(k + 1) * h_len], &mut dh_final);
    }

    // LSTM stack, top to bottom. `dh_out` holds dL/dh_t coming from above.
    let mut dh_out = vec![0.0; steps * h_len];
    dh_out[(steps - 1) * h_len..].copy_from_slice(&dh_final);
    let mut dx_seq = Vec::new();
    for l in (0..cfg.lstm_layers).rev() {
        let spans = &layout.layers[l];
        let in_len = spans.input;
        let w_ih = &p[spans.w_ih.range()];
        let w_hh = &p[spans.w_hh.range()];
        let a = &acts.layers[l];
        let mut dx = vec![0.0; steps * in_len];
        let mut dh_rec = vec![0.0; h_len];
        let mut dc_rec = vec![0.0; h_len];
        let mut dz = vec![0.0; 4 * h_len];
        for s in (0..steps).rev() {
            let gates = &a.gates[s * 4 * h_len..(s + 1) * 4 * h_len];
            for j in 0..h_len {
                let (i, f, g, o) = (gates[j], gates[h_len + j], gates[2 * h_len + j], gates[3 * h_len + j]);
                let c = a.c[(s + 1) * h_len + j];
                let c_prev = a.c[s * h_len + j];
                let tc = c.tanh();
                let dh = dh_out[s * h_len + j] + dh_rec[j];
                let d_o = dh * tc;
                let dc = dc_rec[j] + dh * o * (1.0 - tc * tc);
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev;
                dc_rec[j] = dc * f;
                dz[j] = d_i * i * (1.0 - i);
                dz[h_len + j] = d_f * f * (1.0 - f);
                dz[2 * h_len + j] = d_g * (1.0 - g * g);
                dz[3 * h_len + j] = d_o * o * (1.0 - o);
            }
            let x: &[f64] = if l == 0 {
                &acts.seq[s * in_len..(s + 1) * in_len]
            } else {
                &acts.layers[l - 1].h[(s + 1) * h_len..(s + 2) * h_len]
            };
            let h_prev = &a.h[s * h_len..(s + 1) * h_len];
            dh_rec.fill(0.0);
            let dx_s = &mut dx[s * in_len..(s + 1) * in_len];
            for r in 0..4 * h_len {
                let g = dz[r];
                if g == 0.0 {
                    continue;
                }
                grad[spans.bias.offset + r] += g;
                let wi_off = spans.w_ih.offset + r * in_len;
                axpy(g, x, &mut grad[wi_off..wi_off + in_len]);
                let wh_off = spans.w_hh.offset + r * h_len;
                axpy(g, h_prev, &mut grad[wh_off..wh_off + h_len]);
                axpy(g, &w_ih[r * in_len..(r + 1) * in_len], dx_s);
                axpy(g, &w_hh[r * h_len..(r + 1) * h_len], &mut dh_rec);
            }
        }
        if l > 0 {
            dh_out = dx;
        } else {
            dx_seq = dx;
        }
    }

    // Pool, ReLU and convolution.
    let t_len = cfg.window_len;
    let f_len = cfg.conv_filters;
    let k_len = cfg.kernel;
    let pad = (k_len - 1) / 2;
    let mut d = vec![0.0; t_len];
    for f in 0..f_len {
        d.fill(0.0);
        let conv_row = &acts.conv[f * t_len..(f + 1) * t_len];
        for s in 0..steps {
            let t = acts.argmax[s * f_len + f];
            if conv_row[t] > 0.0 {
                d[t] += dx_seq[s * f_len + f];
            }
        }
        grad[layout.conv_b.offset + f] += d.iter().sum::<f64>();
        for c in 0..cfg.channels {
            let x = &input[c * t_len..(c + 1) * t_len];
            for k in 0..k_len {
                let lo = pad.saturating_sub(k);
                let hi = (t_len + pad - k).min(t_len);
                if lo >= hi {
                    continue;
                }
                let xs = &x[lo + k - pad..hi + k - pad];
                grad[layout.conv_w.offset + (f * cfg.channels + c) * k_len + k] += dot(&d[lo..hi], xs);
            }
        }
    }
}

/// Gradient of the batch-mean weighted cross-entropy, plus the loss itself.
pub(crate) fn batch_gradient(
    cfg: &ModelConfig,
    layout: &Layout,
    p: &[f64],
    inputs: &[&[f64]],
    targets: &[usize],
    class_weights: &[f64],
) -> (f64, Vec<f64>) {
    // Each sample's gradient is formed in its own buffer and the sum is
    // scaled once, so a duplicated sample reproduces its gradient exactly.
    let mut grad = vec![0.0; layout.len];
    let mut sample_grad = vec![0.0; layout.len];
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        let acts = forward(cfg, layout, p, x);
        let probs = softmax(&acts.logits);
        let w = class_weights[y];
        total += sample_loss(&probs, y, w);
        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, pk)| w * (pk - if k == y { 1.0 } else { 0.0 }))
            .collect();
        sample_grad.fill(0.0);
        backward(cfg, layout, p, x, &acts, &dlogits, &mut sample_grad);
        for (a, b) in grad.iter_mut().zip(&sample_grad) {
            *a += b;
        }
    }
    let scale = 1.0 / inputs.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (total * scale, grad)
}
