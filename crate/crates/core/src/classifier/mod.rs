//! From-scratch CNN-LSTM gesture/force classifier.
//!
//! All arithmetic is `f64`. Parameters live in one flat vector; [`Layout`]
//! names the tensor views into it.

mod checkpoint;
mod metrics;
mod network;
mod train;

pub use checkpoint::{ModelCheckpoint, Prediction, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use metrics::{evaluate, ConfusionMatrix, Evaluation};
pub use network::{loss, sample_loss, softmax, Layout, LstmSpans, Span, PROB_FLOOR};
pub use train::{class_weights_inverse_frequency, gradient, init_params, train, EpochLog, TrainConfig, TrainingLog};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::CHANNELS;

/// Network architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub channels: usize,
    /// Samples per input window.
    pub window_len: usize,
    pub conv_filters: usize,
    /// Odd convolution kernel length.
    pub kernel: usize,
    /// Max-pool width between the ReLU and the LSTM; 1 feeds every step.
    pub pool: usize,
    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::compact(2600)
    }
}

impl ModelConfig {
    /// Full-size architecture: 128 filters of width 5 feeding a
    /// 5-layer, 256-unit LSTM at every time step.
    pub fn full(window_len: usize) -> Self {
        ModelConfig {
            channels: CHANNELS,
            window_len,
            conv_filters: 128,
            kernel: 5,
            pool: 1,
            lstm_layers: 5,
            lstm_hidden: 256,
            classes: GestureClass::ALL.len(),
        }
    }

    /// Reduced width, one LSTM layer and max-pooling down to four time steps
    /// so that CPU training stays in minutes.
    pub fn compact(window_len: usize) -> Self {
        ModelConfig {
            channels: CHANNELS,
            window_len,
            conv_filters: 16,
            kernel: 5,
            pool: (window_len / 4).max(1),
            lstm_layers: 1,
            lstm_hidden: 32,
            classes: GestureClass::ALL.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("channels", self.channels),
            ("window_len", self.window_len),
            ("conv_filters", self.conv_filters),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("classes", self.classes),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model dimension {name} must be positive")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel {} must be odd for same padding", self.kernel)));
        }
        if self.pool > self.window_len {
            return Err(Error::Config(format!(
                "pool {} exceeds window length {}",
                self.pool, self.window_len
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        Ok(())
    }

    /// LSTM sequence length. Trailing samples that do not fill a pool are dropped.
    pub fn seq_len(&self) -> usize {
        self.window_len / self.pool
    }

    pub fn param_count(&self) -> usize {
        Layout::new(self).len
    }

    /// FNV-1a over the little-endian architecture fields.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.fields() {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub(crate) fn fields(&self) -> [u32; 8] {
        [
            self.channels as u32,
            self.window_len as u32,
            self.conv_filters as u32,
            self.kernel as u32,
            self.pool as u32,
            self.lstm_layers as u32,
            self.lstm_hidden as u32,
            self.classes as u32,
        ]
    }

    pub(crate) fn from_fields(f: [u32; 8]) -> Self {
        ModelConfig {
            channels: f[0] as usize,
            window_len: f[1] as usize,
            conv_filters: f[2] as usize,
            kernel: f[3] as usize,
            pool: f[4] as usize,
            lstm_layers: f[5] as usize,
            lstm_hidden: f[6] as usize,
            classes: f[7] as usize,
        }
    }
}
