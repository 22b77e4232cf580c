//! Wearable MMG teleoperation stack.
//!
//! Five-channel forearm mechanomyography (MMG) windows are filtered, normalized
//! and classified by a CNN-LSTM into six gesture/force classes. A mode-based
//! control protocol turns button presses, hand tilt and classified gestures
//! into commands for a simulated Mecanum-base manipulator, and grip force is
//! reported back as one of eight vibration cues. The [`harness`] module runs
//! the recognition, navigation and object-transfer experiments end to end.

// `!(x >= lo)` style checks are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod config;
pub mod control;
pub mod error;
pub mod gesture;
pub mod harness;
pub mod link;
pub(crate) mod rng;
pub mod signal;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};

/// Number of MMG channels (one per instrumented forearm muscle).
pub const CHANNELS: usize = 5;

/// Default ADC sampling rate of the wearable.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 2600.0;
