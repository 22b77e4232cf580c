use serde::{Deserialize, Serialize};

use super::Trace;
use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::CHANNELS;

/// Fixed-length multi-channel block of sensor counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    samples: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
    pub t0_us: i64,
    pub label: Option<GestureClass>,
}

impl SignalWindow {
    pub fn new(
        samples: Vec<Vec<f64>>,
        sample_rate_hz: f64,
        t0_us: i64,
        label: Option<GestureClass>,
    ) -> Result<Self> {
        let len = samples.first().map(Vec::len).unwrap_or(0);
        if samples.is_empty() || len == 0 {
            return Err(Error::RejectedInput("window needs at least one channel and one sample".into()));
        }
        if samples.iter().any(|c| c.len() != len) {
            return Err(Error::RejectedInput("window channels differ in length".into()));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::RejectedInput(format!("sample rate {sample_rate_hz} must be positive")));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::RejectedInput("window contains non-finite samples".into()));
        }
        Ok(SignalWindow {
            samples,
            sample_rate_hz,
            t0_us,
            label,
        })
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.samples[c]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Applies `f` to every channel, keeping metadata.
    pub fn map_channels<F>(&self, mut f: F) -> Result<SignalWindow>
    where
        F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(c, x)| f(c, x))
            .collect::<Result<Vec<_>>>()?;
        SignalWindow::new(samples, self.sample_rate_hz, self.t0_us, self.label)
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }
}

/// Per-channel normalization statistics, fixed at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose measured deviation was zero and were given `std = 1`.
    pub degenerate: Vec<bool>,
}

impl ChannelStats {
    pub fn identity(channels: usize) -> Self {
        ChannelStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            degenerate: vec![false; channels],
        }
    }

    /// Population mean and standard deviation of each channel across all windows.
    pub fn from_windows(windows: &[SignalWindow]) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::RejectedInput("cannot compute statistics of zero windows".into()))?;
        let channels = first.channels();
        if windows.iter().any(|w| w.channels() != channels) {
            return Err(Error::RejectedInput("windows differ in channel count".into()));
        }
        let mut stats = ChannelStats::identity(channels);
        for c in 0..channels {
            let count: usize = windows.iter().map(|w| w.len()).sum();
            let mean = windows.iter().flat_map(|w| w.channel(c)).sum::<f64>() / count as f64;
            let var = windows
                .iter()
                .flat_map(|w| w.channel(c))
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / count as f64;
            stats.mean[c] = mean;
            if var > 0.0 {
                stats.std[c] = var.sqrt();
            } else {
                log::warn!("channel {c} has zero variance; normalizing with std = 1");
                stats.degenerate[c] = true;
            }
        }
        Ok(stats)
    }

    fn check(&self, w: &SignalWindow) -> Result<()> {
        if w.channels() != self.mean.len() {
            return Err(Error::RejectedInput(format!(
                "window has {} channels, statistics cover {}",
                w.channels(),
                self.mean.len()
            )));
        }
        Ok(())
    }

    pub fn denormalize(&self, w: &SignalWindow) -> Result<SignalWindow> {
        self.check(w)?;
        w.map_channels(|c, x| Ok(x.iter().map(|v| v * self.std[c] + self.mean[c]).collect()))
    }
}

/// `(x - mean) / std` per channel using stored statistics.
pub fn normalize(w: &SignalWindow, stats: &ChannelStats) -> Result<SignalWindow> {
    stats.check(w)?;
    w.map_channels(|c, x| {
        let std = if stats.std[c] > 0.0 { stats.std[c] } else { 1.0 };
        Ok(x.iter().map(|v| (v - stats.mean[c]) / std).collect())
    })
}

/// Cuts a continuous trace into windows of `window_s` seconds with fractional
/// `overlap`. A trace shorter than one window yields no windows.
pub fn segment_windows(stream: &Trace, window_s: f64, overlap: f64) -> Result<Vec<SignalWindow>> {
    if !(window_s > 0.0) {
        return Err(Error::InvalidSpec(format!("window length {window_s} s must be positive")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidSpec(format!("overlap {overlap} must lie in [0, 1)")));
    }
    let win = (window_s * stream.sample_rate_hz).round() as usize;
    let hop = ((win as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let n = stream.len();
    if win == 0 || n < win {
        log::warn!(
            "stream of {} samples is shorter than one {} sample window",
            n,
            win
        );
        return Ok(Vec::new());
    }
    let count = (n - win) / hop + 1;
    (0..count)
        .map(|k| {
            let start = k * hop;
            let samples = (0..CHANNELS.min(stream.channels.len()))
                .map(|c| stream.channels[c][start..start + win].to_vec())
                .collect();
            let label = stream.labels.get(start + win / 2).copied().flatten();
            SignalWindow::new(samples, stream.sample_rate_hz, stream.t_us[start], label)
        })
        .collect()
}
