//! Experiment runners, report emission, the live session server and replay.

pub mod navigation;
pub mod operator;
pub mod recognition;
pub mod report;
pub mod rig;
pub mod serve;
pub mod session;
pub mod transfer;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ActivityGate, ButtonParams, FeedbackParams, TiltParams};
use crate::link::LinkConfig;
use crate::rng::{derive_seed, rng_for};
use crate::sim::RobotParams;

pub use navigation::{run_navigation, summarize_navigation, NavSummary, NavTrial, NavigationParams, NavigationReport};
pub use recognition::{class_scores, run_recognition, summarize_recognition, ClassScore, RecognitionParams, RecognitionReport, RecognitionSummary, RecognitionTrial};
pub use operator::{Driver, OperatorParams, Tremor};
pub use transfer::{run_transfer, summarize_transfer, TransferParams, TransferReport, TransferSummary, TransferTrial};
pub use session::{replay, ClientMessage, GripAction, LogRecord, ReplayReport, ServerMessage, Session, SessionMetrics, Telemetry};
pub use rig::{Rig, RigEvent, TimedRigEvent, INPUT_PERIOD_MS, STEP_MS};

/// Parameters shared by every experiment rig.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Setup {
    pub robot: RobotParams,
    pub link: LinkConfig,
    pub tilt: TiltParams,
    pub button: ButtonParams,
    pub feedback: FeedbackParams,
    pub gate: ActivityGate,
    pub operator: OperatorParams,
}

impl Setup {
    /// Link configuration with a per-trial random stream.
    pub fn link_for(&self, seed: u64) -> LinkConfig {
        LinkConfig {
            seed: derive_seed(self.link.seed, &[seed]),
            ..self.link
        }
    }

    /// Operator `k`: the base policy with individual tremor and pace.
    pub fn operator_variant(&self, seed: u64, k: u64) -> OperatorParams {
        let mut rng = rng_for(seed, &[0x0be7, k]);
        let mut op = self.operator;
        op.tremor_deg *= rng.random_range(0.8..=1.2);
        op.cruise_speed = (op.cruise_speed * rng.random_range(0.9..=1.1)).min(self.tilt.v_max);
        op
    }
}
