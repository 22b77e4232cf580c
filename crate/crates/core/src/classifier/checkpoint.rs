//! Trained model container and its binary file format.
//!
//! The byte layout is described in `docs/checkpoint-format.md`.

use std::path::Path;

use super::network::{self, Layout};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::signal::{normalize, savitzky_golay, ChannelStats, FilterSpec, SignalWindow};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"MMGCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Weights, normalization statistics and class order of a trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: ModelConfig,
    params: Vec<f64>,
    pub stats: ChannelStats,
    pub labels: Vec<GestureClass>,
    /// Savitzky-Golay smoothing applied before normalization, if any.
    pub smoothing: Option<FilterSpec>,
}

/// Output of [`ModelCheckpoint::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub class: GestureClass,
    pub probabilities: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Prediction {
    pub fn confidence(&self) -> f64 {
        self.probabilities[self.index]
    }
}

impl ModelCheckpoint {
    pub fn new(
        config: ModelConfig,
        params: Vec<f64>,
        stats: ChannelStats,
        labels: Vec<GestureClass>,
        smoothing: Option<FilterSpec>,
    ) -> Result<Self> {
        config.validate()?;
        let expected = config.param_count();
        if params.len() != expected {
            return Err(Error::Checkpoint(format!(
                "{} parameters do not fit the architecture ({expected})",
                params.len()
            )));
        }
        if labels.len() != config.classes {
            return Err(Error::Checkpoint(format!(
                "{} labels for {} classes",
                labels.len(),
                config.classes
            )));
        }
        if stats.mean.len() != config.channels || stats.std.len() != config.channels {
            return Err(Error::Checkpoint("normalization statistics do not match channel count".into()));
        }
        if let Some(s) = &smoothing {
            s.validate_smoothing()?;
        }
        Ok(ModelCheckpoint {
            config,
            params,
            stats,
            labels,
            smoothing,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Named tensor view, e.g. `"lstm.0.w_ih"`.
    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout()
            .tensors(&self.config)
            .into_iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, span)| &self.params[span.range()])
    }

    fn check_shape(&self, w: &SignalWindow) -> Result<()> {
        if w.channels() != self.config.channels || w.len() != self.config.window_len {
            return Err(Error::Shape {
                expected: format!("{} x {}", self.config.channels, self.config.window_len),
                actual: format!("{} x {}", w.channels(), w.len()),
            });
        }
        Ok(())
    }

    /// Probabilities and logits for an already normalized window.
    pub fn forward(&self, w: &SignalWindow) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_shape(w)?;
        let input: Vec<f64> = w.samples().concat();
        let acts = network::forward(&self.config, &self.layout(), &self.params, &input);
        Ok((network::softmax(&acts.logits), acts.logits))
    }

    /// Smoothing followed by normalization with the stored statistics.
    pub fn preprocess(&self, raw: &SignalWindow) -> Result<SignalWindow> {
        self.check_shape(raw)?;
        let smoothed = match &self.smoothing {
            Some(spec) => raw.map_channels(|_, x| savitzky_golay(x, spec))?,
            None => raw.clone(),
        };
        normalize(&smoothed, &self.stats)
    }

    /// Classifies a raw window of sensor counts.
    pub fn predict(&self, raw: &SignalWindow) -> Result<Prediction> {
        let (probabilities, logits) = self.forward(&self.preprocess(raw)?)?;
        let index = argmax(&probabilities);
        Ok(Prediction {
            index,
            class: self.labels[index],
            probabilities,
            logits,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.params.len() * 8);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in self.config.fields() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.config.hash().to_le_bytes());
        let (sg_window, sg_order) = self
            .smoothing
            .map(|s| (s.sg_window as u32, s.sg_order as u32))
            .unwrap_or((0, 0));
        out.extend_from_slice(&sg_window.to_le_bytes());
        out.extend_from_slice(&sg_order.to_le_bytes());
        for label in &self.labels {
            let s = label.to_string();
            out.push(s.len() as u8);
            out.extend_from_slice(s.as_bytes());
        }
        for c in 0..self.config.channels {
            out.extend_from_slice(&self.stats.mean[c].to_le_bytes());
            out.extend_from_slice(&self.stats.std[c].to_le_bytes());
            out.push(self.stats.degenerate[c] as u8);
        }
        let tensors = self.layout().tensors(&self.config);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, span) in tensors {
            out.push(name.len() as u8);
            out.extend_from_slice(name.as_bytes());
            out.push(shape.len() as u8);
            for d in shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &self.params[span.range()] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let mut fields = [0u32; 8];
        for f in fields.iter_mut() {
            *f = r.u32()?;
        }
        let config = ModelConfig::from_fields(fields);
        config.validate().map_err(|e| Error::Checkpoint(format!("stored architecture invalid: {e}")))?;
        let hash = r.u64()?;
        if hash != config.hash() {
            return Err(Error::Checkpoint("config hash does not match stored architecture".into()));
        }
        let sg_window = r.u32()? as usize;
        let sg_order = r.u32()? as usize;
        let smoothing = (sg_window > 0).then(|| FilterSpec {
            sg_window,
            sg_order,
            ..FilterSpec::default()
        });
        let mut labels = Vec::with_capacity(config.classes);
        for _ in 0..config.classes {
            let len = r.u8()? as usize;
            let s = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("label is not UTF-8".into()))?;
            labels.push(s.parse().map_err(|_| Error::Checkpoint(format!("unknown label {s:?}")))?);
        }
        let mut stats = ChannelStats::identity(config.channels);
        for c in 0..config.channels {
            stats.mean[c] = r.f64()?;
            stats.std[c] = r.f64()?;
            stats.degenerate[c] = r.u8()? != 0;
        }
        let layout = Layout::new(&config);
        let expected = layout.tensors(&config);
        let count = r.u32()? as usize;
        if count != expected.len() {
            return Err(Error::Checkpoint(format!(
                "{count} tensors stored, architecture has {}",
                expected.len()
            )));
        }
        let mut params = vec![0.0; layout.len];
        for (name, shape, span) in expected {
            let len = r.u8()? as usize;
            let stored = r.take(len)?;
            if stored != name.as_bytes() {
                return Err(Error::Checkpoint(format!(
                    "expected tensor {name}, found {}",
                    String::from_utf8_lossy(stored)
                )));
            }
            let ndim = r.u8()? as usize;
            let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            if dims != shape {
                return Err(Error::Checkpoint(format!("tensor {name} has shape {dims:?}, expected {shape:?}")));
            }
            for v in &mut params[span.range()] {
                *v = r.f64()?;
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        ModelCheckpoint::new(config, params, stats, labels, smoothing)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// FNV-1a over the serialized form; equal hashes mean identical checkpoints.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
