//! Wearable-side control protocol: button modes, tilt steering, grip
//! commands from classified gestures, and vibration feedback indices.

mod commander;
mod feedback;
mod fsm;
mod tilt;

pub use commander::{ActivityGate, GestureCommander, GripCommand};
pub use feedback::{force_bin, force_to_feedback, grip_adjust, FeedbackParams, FORCE_BINS, OVER_FORCE_CUE, SLIP_CUE};
pub use fsm::{ButtonEvent, ButtonParams, ControlState, Mode, Press};
pub use tilt::{tilt_to_velocity, TiltParams, TiltReading, VelocityCommand};
