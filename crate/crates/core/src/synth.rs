//! Seeded generator of MMG traces with per-muscle, per-gesture, per-force
//! activation profiles, plus the buzzer bench tone used to check the FFT path.
//!
//! Activity is modeled as Gaussian bumps on a constant baseline with additive
//! Gaussian noise. Bump counts, heights and widths are drawn uniformly from the
//! ranges of the class profile. Every output is a pure function of its inputs
//! and seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{ForceLevel, Gesture, GestureClass, Muscle};
use crate::rng::{derive_seed, rng_for};
use crate::signal::{read_windows_csv, sample_time_from, write_windows_csv, SignalWindow, Trace};
use crate::{CHANNELS, DEFAULT_SAMPLE_RATE_HZ};

/// Sensor counts at rest.
pub const BASELINE_UNITS: f64 = 128.0;
/// Default additive noise, sensor counts.
pub const NOISE_STD_UNITS: f64 = 3.0;
/// ADC output range.
pub const SENSOR_RANGE: (f64, f64) = (0.0, 1023.0);

/// Generative description of one muscle's activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleProfile {
    /// Peaks per second of activity, inclusive.
    pub peak_count_range: (u32, u32),
    /// Absolute sensor value at the bump apex, inclusive.
    pub peak_amplitude_range: (f64, f64),
    /// Full width at half maximum of each bump.
    pub peak_width_ms_range: (f64, f64),
    pub baseline_units: f64,
    pub noise_std_units: f64,
}

impl MuscleProfile {
    pub fn quiet() -> Self {
        MuscleProfile {
            peak_count_range: (0, 0),
            peak_amplitude_range: (BASELINE_UNITS, BASELINE_UNITS),
            peak_width_ms_range: (40.0, 120.0),
            baseline_units: BASELINE_UNITS,
            noise_std_units: NOISE_STD_UNITS,
        }
    }

    fn active(count: (u32, u32), amplitude: (f64, f64)) -> Self {
        MuscleProfile {
            peak_count_range: count,
            peak_amplitude_range: amplitude,
            ..Self::quiet()
        }
    }

    fn validate(&self) -> Result<()> {
        let (c0, c1) = self.peak_count_range;
        let (a0, a1) = self.peak_amplitude_range;
        let (w0, w1) = self.peak_width_ms_range;
        if c0 > c1 || a0 > a1 || w0 > w1 {
            return Err(Error::InvalidSpec("profile range with min > max".into()));
        }
        if a0 < SENSOR_RANGE.0 || a1 > SENSOR_RANGE.1 || !(w0 > 0.0) || self.noise_std_units < 0.0 {
            return Err(Error::InvalidSpec("profile value outside the sensor range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureProfile {
    pub class: GestureClass,
    /// Indexed by [`Muscle::channel`].
    pub muscles: [MuscleProfile; CHANNELS],
}

impl GestureProfile {
    pub fn muscle(&self, m: Muscle) -> &MuscleProfile {
        &self.muscles[m.channel()]
    }

    pub fn validate(&self) -> Result<()> {
        self.muscles.iter().try_for_each(MuscleProfile::validate)
    }

    /// Same profile with every noise level replaced.
    pub fn with_noise(mut self, noise_std: f64) -> Self {
        for m in &mut self.muscles {
            m.noise_std_units = noise_std;
        }
        self
    }
}

/// Gesture, level, peak count range and peak amplitude range of the dominant muscles.
type ProfileRow = (Gesture, ForceLevel, (u32, u32), (f64, f64));

/// The class table. Gripping drives FCU, ECRL and ECRB; wrist flexion drives
/// FCR and ECRL. Other muscles stay at baseline plus noise.
pub fn default_profiles() -> BTreeMap<GestureClass, GestureProfile> {
    use ForceLevel::*;
    let table: [ProfileRow; 6] = [
        (Gesture::Grip, L1Strong, (3, 4), (255.0, 270.0)),
        (Gesture::Grip, L2Moderate, (2, 2), (248.0, 262.0)),
        (Gesture::Grip, L3Light, (1, 1), (228.0, 242.0)),
        (Gesture::Wrist, L1Strong, (1, 2), (263.0, 277.0)),
        (Gesture::Wrist, L2Moderate, (2, 2), (250.0, 260.0)),
        (Gesture::Wrist, L3Light, (1, 1), (244.0, 256.0)),
    ];
    table
        .into_iter()
        .map(|(gesture, level, count, amplitude)| {
            let dominant: &[Muscle] = match gesture {
                Gesture::Grip => &[Muscle::Fcu, Muscle::Ecrl, Muscle::Ecrb],
                Gesture::Wrist => &[Muscle::Fcr, Muscle::Ecrl],
            };
            let mut muscles = [MuscleProfile::quiet(); CHANNELS];
            for m in dominant {
                muscles[m.channel()] = MuscleProfile::active(count, amplitude);
            }
            let class = GestureClass::new(gesture, level);
            (class, GestureProfile { class, muscles })
        })
        .collect()
}

/// Timing constraints on bump placement within each one-second segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Placement {
    pub sample_rate_hz: f64,
    pub segment_s: f64,
    /// Minimum apex-to-apex spacing.
    pub min_gap_ms: f64,
    /// Apex distance from segment boundaries.
    pub edge_margin_ms: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Placement {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            segment_s: 1.0,
            min_gap_ms: 200.0,
            edge_margin_ms: 80.0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn uniform_count(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> u32 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Apex sample indices for `count` bumps in a segment starting at `start`.
fn place_apexes(rng: &mut ChaCha8Rng, count: u32, start: usize, p: &Placement) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    let fs = p.sample_rate_hz;
    let seg = p.segment_s * fs;
    let margin = p.edge_margin_ms * 1e-3 * fs;
    let gap = p.min_gap_ms * 1e-3 * fs;
    let slack = (seg - 2.0 * margin - (count - 1) as f64 * gap).max(0.0);
    let mut offsets: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * slack).collect();
    offsets.sort_by(f64::total_cmp);
    offsets
        .iter()
        .enumerate()
        .map(|(i, u)| start + (margin + u + i as f64 * gap).round() as usize)
        .collect()
}

/// Generates a 5-channel trace of `duration_s` seconds for `profile`.
pub fn generate_trace(profile: &GestureProfile, seed: u64, duration_s: f64) -> Result<Trace> {
    generate_trace_with(profile, seed, duration_s, 1.0, &Placement::default())
}

/// As [`generate_trace`] with bump heights above baseline scaled by `gain`.
pub fn generate_trace_with(
    profile: &GestureProfile,
    seed: u64,
    duration_s: f64,
    gain: f64,
    placement: &Placement,
) -> Result<Trace> {
    profile.validate()?;
    if !(duration_s > 0.0) || !(gain >= 0.0) {
        return Err(Error::InvalidSpec(format!("duration {duration_s} and gain {gain} must be positive")));
    }
    let fs = placement.sample_rate_hz;
    let n = (duration_s * fs).round() as usize;
    let seg_len = (placement.segment_s * fs).round() as usize;
    let segments = n.div_ceil(seg_len);

    let channels = profile
        .muscles
        .iter()
        .enumerate()
        .map(|(c, mp)| {
            let mut rng = rng_for(seed, &[c as u64]);
            let mut x = vec![mp.baseline_units; n];
            for s in 0..segments {
                let count = uniform_count(&mut rng, mp.peak_count_range);
                for apex in place_apexes(&mut rng, count, s * seg_len, placement) {
                    let amp = uniform(&mut rng, mp.peak_amplitude_range);
                    let fwhm_ms = uniform(&mut rng, mp.peak_width_ms_range);
                    let height = (amp - mp.baseline_units) * gain;
                    let sigma = fwhm_ms * 1e-3 * fs / (8.0 * 2f64.ln()).sqrt();
                    let reach = (5.0 * sigma).ceil() as usize;
                    let lo = apex.saturating_sub(reach);
                    let hi = (apex + reach).min(n.saturating_sub(1));
                    for (i, v) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
                        let d = i as f64 - apex as f64;
                        *v += height * (-0.5 * d * d / (sigma * sigma)).exp();
                    }
                }
            }
            if mp.noise_std_units > 0.0 {
                let normal = Normal::new(0.0, mp.noise_std_units).expect("finite std");
                for v in &mut x {
                    *v += normal.sample(&mut rng);
                }
            }
            for v in &mut x {
                *v = v.clamp(SENSOR_RANGE.0, SENSOR_RANGE.1);
            }
            x
        })
        .collect();
    Trace::from_channels(channels, fs, 0)
}

/// Labeled train/test split of synthetic windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub samples_per_class: usize,
    pub seed: u64,
    pub window_s: f64,
    pub classes: Vec<GestureClass>,
    /// Half-width of the multiplicative subject gain on bump heights.
    pub variability: f64,
    /// Subjects contributing windows, assigned round-robin. Subject 0 is the
    /// reference subject the profiles describe (gain 1); the others draw a
    /// gain from `variability`.
    pub subjects: usize,
    pub test_fraction: f64,
    pub noise_std: f64,
    pub placement: Placement,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            samples_per_class: 100,
            seed: 1,
            window_s: 1.0,
            classes: GestureClass::ALL.to_vec(),
            variability: 0.10,
            subjects: 1,
            test_fraction: 0.2,
            noise_std: NOISE_STD_UNITS,
            placement: Placement::default(),
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 {
            return Err(Error::Config("need at least one subject".into()));
        }
        if self.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be at least 1".into()));
        }
        let mut sorted = self.classes.clone();
        sorted.sort();
        sorted.dedup();
        if self.classes.len() != GestureClass::COUNT || sorted.len() != GestureClass::COUNT {
            return Err(Error::Config("dataset must list the six classes exactly once".into()));
        }
        if !(self.variability >= 0.0 && self.variability < 1.0) {
            return Err(Error::Config(format!("variability {} must be in [0, 1)", self.variability)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) || !(self.window_s > 0.0) {
            return Err(Error::Config("test_fraction must be in [0, 1) and window_s positive".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        (self.window_s * self.placement.sample_rate_hz).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<SignalWindow>,
    pub test: Vec<SignalWindow>,
}

/// Draws a subject gain in `[1 - v, 1 + v]`.
pub fn subject_gain(rng: &mut ChaCha8Rng, variability: f64) -> f64 {
    if variability > 0.0 {
        1.0 + rng.random_range(-variability..=variability)
    } else {
        1.0
    }
}

/// Gain of subject `subject` under base seed `seed`; every call with the
/// same arguments returns the same value.
pub fn subject_gain_for(seed: u64, subject: u64, variability: f64) -> f64 {
    subject_gain(&mut rng_for(seed, &[0x5b1ec7, subject]), variability)
}

/// Balanced, stratified dataset; every window has its own derived seed.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let profiles = default_profiles();
    let n_test = (spec.samples_per_class as f64 * spec.test_fraction).round() as usize;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in &spec.classes {
        let profile = profiles[class].clone().with_noise(spec.noise_std);
        let mut windows = (0..spec.samples_per_class)
            .map(|i| {
                let seed = derive_seed(spec.seed, &[class.index() as u64, i as u64]);
                let subject = (i % spec.subjects) as u64;
                let gain = if subject == 0 {
                    1.0
                } else {
                    subject_gain_for(spec.seed, subject, spec.variability)
                };
                let trace = generate_trace_with(&profile, seed, spec.window_s, gain, &spec.placement)?;
                SignalWindow::new(trace.channels, trace.sample_rate_hz, 0, Some(*class))
            })
            .collect::<Result<Vec<_>>>()?;
        // Which samples land in the test split is itself seeded.
        let mut rng = rng_for(spec.seed, &[class.index() as u64, u64::MAX - 1]);
        for i in (1..windows.len()).rev() {
            let j = rng.random_range(0..=i);
            windows.swap(i, j);
        }
        let rest = windows.split_off(n_test);
        test.extend(windows);
        train.extend(rest);
    }
    restamp(&mut train);
    restamp(&mut test);
    Ok(Dataset { train, test })
}

/// Lays windows end to end on the time axis so they form one monotone stream.
fn restamp(windows: &mut [SignalWindow]) {
    let mut t0 = 0;
    for w in windows {
        w.t0_us = t0;
        t0 = sample_time_from(t0, w.len(), w.sample_rate_hz);
    }
}

impl Dataset {
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_windows_csv(&dir.join("train.csv"), &self.train)?;
        write_windows_csv(&dir.join("test.csv"), &self.test)
    }

    pub fn read_csv(dir: &Path, sample_rate_hz: f64, window_len: usize) -> Result<Self> {
        Ok(Dataset {
            train: read_windows_csv(&dir.join("train.csv"), sample_rate_hz, window_len)?,
            test: read_windows_csv(&dir.join("test.csv"), sample_rate_hz, window_len)?,
        })
    }
}

/// Bench scenario: a buzzer tone pressed against the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuzzerBench {
    pub freq_hz: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub noise_std: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for BuzzerBench {
    fn default() -> Self {
        BuzzerBench {
            freq_hz: 1000.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            duration_s: 1.0,
            noise_std: 0.0,
            amplitude: 100.0,
            seed: 0,
        }
    }
}

impl BuzzerBench {
    pub fn generate(&self) -> Result<Vec<f64>> {
        if !(self.freq_hz > 0.0 && self.freq_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::InvalidSpec(format!(
                "buzzer frequency {} Hz must lie below Nyquist ({} Hz)",
                self.freq_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        let n = (self.duration_s * self.sample_rate_hz).round() as usize;
        let mut rng = rng_for(self.seed, &[]);
        let normal = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite std");
        Ok((0..n)
            .map(|i| {
                let t = i as f64 / self.sample_rate_hz;
                let noise = if self.noise_std > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                self.amplitude * (2.0 * std::f64::consts::PI * self.freq_hz * t).sin() + noise
            })
            .collect())
    }
}

/// Single-channel buzzer tone of unit-100 amplitude.
pub fn buzzer_bench(freq_hz: f64, sample_rate_hz: f64, duration_s: f64, noise_std: f64) -> Result<Vec<f64>> {
    BuzzerBench {
        freq_hz,
        sample_rate_hz,
        duration_s,
        noise_std,
        ..BuzzerBench::default()
    }
    .generate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{detect_peaks, fft_spectrum};

    fn profile(class: usize) -> GestureProfile {
        default_profiles()[&GestureClass::ALL[class]].clone()
    }

    #[test]
    fn class_table_values() {
        let p = default_profiles();
        assert_eq!(p.len(), 6);
        let grip_strong = &p[&GestureClass::ALL[0]];
        assert_eq!(grip_strong.muscle(Muscle::Fcu).peak_count_range, (3, 4));
        assert_eq!(grip_strong.muscle(Muscle::Fcu).peak_amplitude_range.1, 270.0);
        assert_eq!(grip_strong.muscle(Muscle::Ed).peak_count_range, (0, 0));

        let grip_light = &p[&GestureClass::ALL[2]];
        let fcu = grip_light.muscle(Muscle::Fcu);
        assert_eq!(fcu.peak_count_range, (1, 1));
        assert!(fcu.peak_amplitude_range.0 <= 235.0 && 235.0 <= fcu.peak_amplitude_range.1);

        let wrist_mod = &p[&GestureClass::ALL[4]];
        let fcr = wrist_mod.muscle(Muscle::Fcr);
        assert_eq!(fcr.peak_count_range, (2, 2));
        assert_eq!(fcr.peak_amplitude_range, (250.0, 260.0));
        assert_eq!(wrist_mod.muscle(Muscle::Fcu).peak_count_range, (0, 0));
    }

    #[test]
    fn trace_is_deterministic() {
        let a = generate_trace(&profile(0), 1, 1.0).unwrap();
        let b = generate_trace(&profile(0), 1, 1.0).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&profile(0), 2, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_single_peak_hits_amplitude_exactly() {
        let mut p = profile(2).with_noise(0.0);
        for m in &mut p.muscles {
            if m.peak_count_range.1 > 0 {
                m.peak_amplitude_range = (270.0, 270.0);
            }
        }
        let t = generate_trace(&p, 9, 1.0).unwrap();
        let max = t.channels[Muscle::Fcu.channel()].iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(max, 270.0);
        assert!(t.channels[Muscle::Ed.channel()].iter().all(|&v| v == BASELINE_UNITS));
    }

    #[test]
    fn strong_grip_peak_count_cross_validates() {
        let p = profile(0);
        let mut ok = 0;
        for seed in 0..1000 {
            let t = generate_trace(&p, seed, 1.0).unwrap();
            let n = detect_peaks(&t.channels[Muscle::Fcu.channel()], 40.0, 260).len();
            if (3..=4).contains(&n) {
                ok += 1;
            }
        }
        assert!(ok >= 990, "{ok}/1000 traces had 3-4 detected peaks");
    }

    #[test]
    fn strong_exceeds_light_by_30_units() {
        let mean_max = |class: usize| {
            (0..1000)
                .map(|s| {
                    let t = generate_trace(&profile(class), s, 1.0).unwrap();
                    t.channels[Muscle::Fcu.channel()].iter().copied().fold(f64::MIN, f64::max)
                })
                .sum::<f64>()
                / 1000.0
        };
        let gap = mean_max(0) - mean_max(2);
        assert!(gap >= 30.0, "gap {gap}");
    }

    #[test]
    fn values_stay_in_sensor_range_without_clipping() {
        let mut clipped = 0usize;
        let mut total = 0usize;
        for (i, p) in default_profiles().values().enumerate() {
            for s in 0..20 {
                let t = generate_trace(p, (i * 100 + s) as u64, 1.0).unwrap();
                for c in &t.channels {
                    total += c.len();
                    clipped += c.iter().filter(|&&v| v <= SENSOR_RANGE.0 || v >= SENSOR_RANGE.1).count();
                    assert!(c.iter().all(|&v| (SENSOR_RANGE.0..=SENSOR_RANGE.1).contains(&v)));
                }
            }
        }
        assert!((clipped as f64) < 0.001 * total as f64);
    }

    #[test]
    fn dataset_split_and_balance() {
        let spec = DatasetSpec {
            samples_per_class: 10,
            ..DatasetSpec::default()
        };
        let d = generate_dataset(&spec).unwrap();
        assert_eq!(d.train.len(), 48);
        assert_eq!(d.test.len(), 12);
        for c in GestureClass::ALL {
            assert_eq!(d.train.iter().filter(|w| w.label == Some(c)).count(), 8);
            assert_eq!(d.test.iter().filter(|w| w.label == Some(c)).count(), 2);
        }
        assert_eq!(generate_dataset(&spec).unwrap(), d);
        assert_eq!(d.train[0].len(), 2600);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let spec = DatasetSpec {
            samples_per_class: 2,
            test_fraction: 0.5,
            ..DatasetSpec::default()
        };
        let d = generate_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write_csv(dir.path()).unwrap();
        let back = Dataset::read_csv(dir.path(), 2600.0, spec.window_len()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn dataset_spec_validation() {
        let mut spec = DatasetSpec::default();
        spec.classes.pop();
        assert!(generate_dataset(&spec).is_err());
        let spec = DatasetSpec {
            samples_per_class: 0,
            ..DatasetSpec::default()
        };
        assert!(generate_dataset(&spec).is_err());
    }

    #[test]
    fn buzzer_bench_spectra() {
        let x = buzzer_bench(1000.0, 2600.0, 1.0, 0.0).unwrap();
        let s = fft_spectrum(&x, 2600.0).unwrap();
        assert!((s.frequency(s.argmax()) - 1000.0).abs() <= s.bin_hz);

        let x = buzzer_bench(650.0, 2600.0, 1.0, 0.0).unwrap();
        let s = fft_spectrum(&x, 2600.0).unwrap();
        assert_eq!(s.argmax(), s.fft_len() / 4);

        let silent = BuzzerBench {
            amplitude: 0.0,
            ..BuzzerBench::default()
        };
        let s = fft_spectrum(&silent.generate().unwrap(), 2600.0).unwrap();
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));

        assert!(matches!(buzzer_bench(1300.0, 2600.0, 1.0, 0.0), Err(Error::InvalidSpec(_))));
    }
}
