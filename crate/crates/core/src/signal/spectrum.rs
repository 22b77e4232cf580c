use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// One-sided DFT magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_hz: f64,
    pub magnitudes: Vec<f64>,
    fft_len: usize,
}

impl Spectrum {
    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn bin_of(&self, freq_hz: f64) -> usize {
        ((freq_hz / self.bin_hz).round() as usize).min(self.magnitudes.len() - 1)
    }

    /// Index of the largest magnitude; ties resolve to the lowest bin.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.magnitudes.iter().enumerate() {
            if m > self.magnitudes[best] {
                best = i;
            }
        }
        best
    }

    /// Largest magnitude within `half_width` bins of `freq_hz`.
    pub fn peak_near(&self, freq_hz: f64, half_width: usize) -> f64 {
        let c = self.bin_of(freq_hz);
        let lo = c.saturating_sub(half_width);
        let hi = (c + half_width).min(self.magnitudes.len() - 1);
        self.magnitudes[lo..=hi].iter().copied().fold(0.0, f64::max)
    }

    /// Signal energy recovered from the one-sided spectrum (Parseval).
    pub fn energy(&self) -> f64 {
        let n = self.fft_len;
        let last = self.magnitudes.len() - 1;
        let sum: f64 = self
            .magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let w = if k == 0 || k == last { 1.0 } else { 2.0 };
                w * m * m
            })
            .sum();
        sum / n as f64
    }
}

/// Magnitude spectrum of `x`, zero-padded to the next power of two.
pub fn fft_spectrum(x: &[f64], sample_rate_hz: f64) -> Result<Spectrum> {
    if x.len() < 2 {
        return Err(Error::RejectedInput(format!(
            "spectrum needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::InvalidSpec(format!("sample rate {sample_rate_hz} must be positive")));
    }
    let n = x.len().next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(Spectrum {
        bin_hz: sample_rate_hz / n as f64,
        magnitudes: buf[..=n / 2].iter().map(|c| c.norm()).collect(),
        fft_len: n,
    })
}
