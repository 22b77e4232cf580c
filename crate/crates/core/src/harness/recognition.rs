use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{self, mean, percentile};
use super::Setup;
use crate::classifier::ModelCheckpoint;
use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::link::{Channel, Command};
use crate::rng::derive_seed;
use crate::signal::SignalWindow;
use crate::synth::{default_profiles, generate_trace_with, subject_gain_for, DatasetSpec, GestureProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionParams {
    pub subjects: usize,
    pub repetitions: usize,
    /// Half-width of the per-subject amplitude gain.
    pub subject_jitter: f64,
    /// Budget for filtering, normalization and inference on the host.
    pub processing_ms: f64,
}

impl Default for RecognitionParams {
    fn default() -> Self {
        RecognitionParams {
            subjects: 5,
            repetitions: 50,
            subject_jitter: 0.15,
            processing_ms: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionTrial {
    pub subject: usize,
    pub gain: f64,
    pub class: GestureClass,
    pub repetition: usize,
    /// `None` when the activity gate saw no gesture.
    pub predicted: Option<GestureClass>,
    pub correct: bool,
    /// Gesture onset to grip command arriving at the robot; `None` if the
    /// frame was lost.
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: GestureClass,
    pub trials: usize,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionSummary {
    pub trials: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub intra_category_errors: f64,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub max_latency_ms: f64,
    pub lost_commands: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionReport {
    pub trials: Vec<RecognitionTrial>,
    pub classes: Vec<ClassScore>,
    pub summary: RecognitionSummary,
}

/// Per-class accuracy (recall) and F1; gate rejections count as misses.
pub fn class_scores(trials: &[RecognitionTrial]) -> Vec<ClassScore> {
    GestureClass::ALL
        .iter()
        .map(|&c| {
            let n = trials.iter().filter(|t| t.class == c).count();
            let tp = trials.iter().filter(|t| t.class == c && t.predicted == Some(c)).count();
            let fp = trials.iter().filter(|t| t.class != c && t.predicted == Some(c)).count();
            let fn_ = n - tp;
            let f1 = if tp + fp + fn_ == 0 {
                1.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            };
            ClassScore {
                class: c,
                trials: n,
                accuracy: if n == 0 { 0.0 } else { tp as f64 / n as f64 },
                f1,
            }
        })
        .collect()
}

pub fn summarize_recognition(trials: &[RecognitionTrial]) -> RecognitionSummary {
    let classes = class_scores(trials);
    let correct = trials.iter().filter(|t| t.correct).count();
    let errors: Vec<_> = trials.iter().filter(|t| !t.correct && t.predicted.is_some()).collect();
    let intra = errors
        .iter()
        .filter(|t| t.predicted.is_some_and(|p| p.gesture == t.class.gesture))
        .count();
    let lat: Vec<f64> = trials.iter().filter_map(|t| t.latency_ms).collect();
    RecognitionSummary {
        trials: trials.len(),
        accuracy: if trials.is_empty() { 0.0 } else { correct as f64 / trials.len() as f64 },
        macro_f1: mean(classes.iter().map(|c| c.f1)),
        intra_category_errors: if errors.is_empty() { 1.0 } else { intra as f64 / errors.len() as f64 },
        mean_latency_ms: mean(lat.iter().copied()),
        p95_latency_ms: percentile(&lat, 0.95),
        max_latency_ms: lat.iter().copied().fold(0.0, f64::max),
        lost_commands: trials.iter().filter(|t| t.predicted.is_some() && t.latency_ms.is_none()).count(),
    }
}

/// Gain of live subject `s`; live subjects are disjoint from the training subject.
pub fn live_subject_gain(seed: u64, s: usize, jitter: f64) -> f64 {
    subject_gain_for(derive_seed(seed, &[0x11fe]), s as u64 + 1, jitter)
}

/// One gesture window as recorded from a live subject.
pub fn live_window(
    profiles: &BTreeMap<GestureClass, GestureProfile>,
    data: &DatasetSpec,
    class: GestureClass,
    gain: f64,
    seed: u64,
) -> Result<SignalWindow> {
    let profile = profiles[&class].clone().with_noise(data.noise_std);
    let trace = generate_trace_with(&profile, seed, data.window_s, gain, &data.placement)?;
    SignalWindow::new(trace.channels, trace.sample_rate_hz, 0, Some(class))
}

/// Live-style trials: every subject performs every class `repetitions` times;
/// each window is gated, classified and the resulting command sent over the link.
pub fn run_recognition(
    setup: &Setup,
    ckpt: Option<&ModelCheckpoint>,
    data: &DatasetSpec,
    params: &RecognitionParams,
    seed: u64,
) -> Result<RecognitionReport> {
    let ckpt = ckpt.ok_or_else(|| Error::Checkpoint("recognition needs a trained checkpoint".into()))?;
    if params.subjects == 0 || params.repetitions == 0 {
        return Err(Error::Config("recognition needs at least one subject and repetition".into()));
    }
    if !(0.0..1.0).contains(&params.subject_jitter) || !(params.processing_ms >= 0.0) {
        return Err(Error::Config("subject_jitter must be in [0, 1) and processing_ms non-negative".into()));
    }
    data.validate()?;
    let profiles = default_profiles();
    let window_ms = data.window_s * 1000.0;
    let jobs: Vec<(usize, GestureClass, usize)> = (0..params.subjects)
        .flat_map(|s| {
            GestureClass::ALL
                .into_iter()
                .flat_map(move |c| (0..params.repetitions).map(move |r| (s, c, r)))
        })
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(s, class, rep)| {
            let gain = live_subject_gain(seed, s, params.subject_jitter);
            let tseed = derive_seed(seed, &[0x7e57, s as u64, class.index() as u64, rep as u64]);
            let w = live_window(&profiles, data, class, gain, tseed)?;
            let predicted = if setup.gate.is_active(&w)? {
                Some(ckpt.predict(&w)?.class)
            } else {
                None
            };
            let latency_ms = match predicted {
                Some(p) => {
                    let mut ch = Channel::new(setup.link_for(tseed), 0)?;
                    let sent = window_ms + params.processing_ms;
                    let r = ch.send(
                        &Command::Grip(crate::control::GripCommand {
                            gesture: p.gesture,
                            level: p.level,
                        }),
                        sent,
                    );
                    r.deliveries.first().copied()
                }
                None => None,
            };
            Ok(RecognitionTrial {
                subject: s,
                gain,
                class,
                repetition: rep,
                predicted,
                correct: predicted == Some(class),
                latency_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = class_scores(&trials);
    let summary = summarize_recognition(&trials);
    Ok(RecognitionReport {
        trials,
        classes,
        summary,
    })
}

impl RecognitionReport {
    pub fn table(&self) -> String {
        let s = &self.summary;
        let mut rows: Vec<(String, String)> = self
            .classes
            .iter()
            .map(|c| (format!("{}", c.class), format!("accuracy {:.2}%  F1 {:.3}", 100.0 * c.accuracy, c.f1)))
            .collect();
        rows.extend([
            ("trials".to_string(), s.trials.to_string()),
            ("overall accuracy".to_string(), format!("{:.2}%", 100.0 * s.accuracy)),
            ("macro F1".to_string(), format!("{:.3}", s.macro_f1)),
            ("intra-category share of errors".to_string(), format!("{:.1}%", 100.0 * s.intra_category_errors)),
            ("mean latency (ms)".to_string(), format!("{:.1}", s.mean_latency_ms)),
            ("p95 latency (ms)".to_string(), format!("{:.1}", s.p95_latency_ms)),
            ("max latency (ms)".to_string(), format!("{:.1}", s.max_latency_ms)),
            ("lost commands".to_string(), s.lost_commands.to_string()),
        ]);
        let borrowed: Vec<(&str, String)> = rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        report::table(
            "Recognition: live-style trials",
            &borrowed,
            &["Reference: 83.33% overall accuracy, 1.2 s response time."],
        )
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = report::emit(dir, "recognition", &self.trials, &self.summary, &self.table())?;
        let classes = dir.join("recognition_classes.csv");
        report::write_records(&classes, &self.classes)?;
        files.push(classes);
        Ok(files)
    }
}
