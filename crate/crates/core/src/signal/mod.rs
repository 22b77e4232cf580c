//! Signal representation and preprocessing for 5-channel MMG streams.
//!
//! Everything here is a pure function over borrowed inputs.

mod bandpass;
mod peaks;
mod savgol;
mod spectrum;
mod trace;
mod window;

pub use bandpass::{bandpass, BANDPASS_ORDER};
pub use peaks::{detect_peaks, Peak};
pub use savgol::{savgol_coefficients, savitzky_golay};
pub use spectrum::{fft_spectrum, Spectrum};
pub use trace::{read_windows_csv, write_windows_csv, Trace};
pub(crate) use trace::sample_time_us as sample_time_from;
pub use window::{normalize, segment_windows, ChannelStats, SignalWindow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing and band-pass parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Savitzky-Golay window length, `2k + 1`.
    pub sg_window: usize,
    /// Savitzky-Golay polynomial order, `< sg_window`.
    pub sg_order: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            sg_window: 51,
            sg_order: 3,
            band_low_hz: 20.0,
            band_high_hz: 1200.0,
        }
    }
}

impl FilterSpec {
    pub fn validate_smoothing(&self) -> Result<()> {
        if self.sg_window.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "Savitzky-Golay window must be odd, got {}",
                self.sg_window
            )));
        }
        if self.sg_order >= self.sg_window {
            return Err(Error::InvalidSpec(format!(
                "Savitzky-Golay order {} must be below window {}",
                self.sg_order, self.sg_window
            )));
        }
        Ok(())
    }

    pub fn validate_band(&self, sample_rate_hz: f64) -> Result<()> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidSpec(format!("sample rate {sample_rate_hz} must be positive")));
        }
        let nyquist = sample_rate_hz / 2.0;
        let (lo, hi) = (self.band_low_hz, self.band_high_hz);
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidSpec(format!("band edges must satisfy 0 <= low < high, got [{lo}, {hi}]")));
        }
        if hi >= nyquist {
            return Err(Error::InvalidSpec(format!("band edge {hi} Hz is not below Nyquist ({nyquist} Hz)")));
        }
        Ok(())
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        self.validate_smoothing()?;
        self.validate_band(sample_rate_hz)
    }
}
