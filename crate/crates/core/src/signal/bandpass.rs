use std::f64::consts::PI;

use super::FilterSpec;
use crate::error::{Error, Result};

/// Butterworth order of each of the high-pass and low-pass halves.
pub const BANDPASS_ORDER: usize = 4;

/// Second-order section in transposed direct form II, normalized `a0 = 1`.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

#[derive(Clone, Copy)]
enum Kind {
    Low,
    High,
}

impl Biquad {
    /// Bilinear transform of an analog second-order Butterworth section,
    /// prewarped at `cutoff_hz`.
    fn design(kind: Kind, cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = match kind {
            Kind::Low => [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
            Kind::High => [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
        };
        Biquad {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input `x0` produce a constant output.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[1] * y;
        let z1 = self.b[1] * x0 - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

fn butterworth_sections(kind: Kind, cutoff_hz: f64, fs: f64) -> Vec<Biquad> {
    (0..BANDPASS_ORDER / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * BANDPASS_ORDER) as f64;
            Biquad::design(kind, cutoff_hz, 1.0 / (2.0 * theta.cos()), fs)
        })
        .collect()
}

fn cascade_pass(sections: &[Biquad], x: &mut [f64]) {
    let mut x0 = x[0];
    for s in sections {
        let z = s.steady_state(x0);
        s.run(x, z);
        x0 *= s.dc_gain();
    }
}

/// Zero-phase Butterworth band-pass: the cascade is run forward then backward
/// over an odd-reflection extension of the signal.
pub fn bandpass(x: &[f64], spec: &FilterSpec, sample_rate_hz: f64) -> Result<Vec<f64>> {
    spec.validate_band(sample_rate_hz)?;
    if x.len() < 2 {
        return Err(Error::RejectedInput("band-pass needs at least two samples".into()));
    }
    let mut sections = Vec::new();
    if spec.band_low_hz > 0.0 {
        sections.extend(butterworth_sections(Kind::High, spec.band_low_hz, sample_rate_hz));
    }
    sections.extend(butterworth_sections(Kind::Low, spec.band_high_hz, sample_rate_hz));

    let n = x.len();
    let pad = (3 * (2 * sections.len() + 1)).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    cascade_pass(&sections, &mut ext);
    ext.reverse();
    cascade_pass(&sections, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}
