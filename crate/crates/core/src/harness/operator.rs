//! Scripted stand-in for a human operator: reaction delay, hand tremor and
//! a corner-to-corner driving policy expressed as wrist tilt.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::rig::{Rig, INPUT_PERIOD_MS};
use crate::control::{Mode, TiltReading};
use crate::error::{Error, Result};
use crate::sim::{wrap_angle, PathSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorParams {
    pub reaction_ms: (f64, f64),
    /// Stationary standard deviation of hand tremor, degrees.
    pub tremor_deg: f64,
    /// Tremor correlation time.
    pub tremor_tau_ms: f64,
    /// Standard deviation of the operator's visual estimate of lateral offset.
    pub perception_m: f64,
    /// Correlation time of that estimation error.
    pub perception_tau_ms: f64,
    pub cruise_speed: f64,
    pub turn_rate: f64,
    pub brake_decel: f64,
    pub heading_gain: f64,
    pub lateral_gain: f64,
    pub turn_gain: f64,
    /// Heading error at which a turn in place counts as done.
    pub turn_done_deg: f64,
    /// Log-normal spread of visual force estimates.
    pub force_estimate_spread: f64,
    /// Chance of ignoring the liquid when judging a container's weight.
    pub liquid_misjudge_prob: f64,
    /// Chance of opening the gripper before the arm is down.
    pub premature_release_prob: f64,
    /// Gentler turn rate while carrying liquid.
    pub liquid_turn_rate: f64,
    /// Speed of the final creep up to an object.
    pub creep_speed: f64,
    /// Error of the close-range estimate of gripper-to-object offset.
    pub alignment_perception_m: f64,
    /// Offset the operator accepts as lined up.
    pub alignment_ok_m: f64,
    pub max_gesture_attempts: u32,
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams {
            reaction_ms: (200.0, 400.0),
            tremor_deg: 1.0,
            tremor_tau_ms: 300.0,
            perception_m: 0.03,
            perception_tau_ms: 1000.0,
            cruise_speed: 0.45,
            turn_rate: 0.9,
            brake_decel: 0.5,
            heading_gain: 1.2,
            lateral_gain: 2.5,
            turn_gain: 1.5,
            turn_done_deg: 2.0,
            force_estimate_spread: 0.15,
            liquid_misjudge_prob: 0.3,
            premature_release_prob: 0.04,
            liquid_turn_rate: 0.4,
            creep_speed: 0.06,
            alignment_perception_m: 0.008,
            alignment_ok_m: 0.015,
            max_gesture_attempts: 4,
        }
    }
}

impl OperatorParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.reaction_ms;
        if !(lo >= 0.0 && lo <= hi) {
            return Err(Error::Config(format!("reaction_ms range ({lo}, {hi}) is invalid")));
        }
        for (name, v) in [
            ("tremor_deg", self.tremor_deg),
            ("perception_m", self.perception_m),
            ("alignment_perception_m", self.alignment_perception_m),
            ("force_estimate_spread", self.force_estimate_spread),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("operator.{name} must be non-negative")));
            }
        }
        for (name, v) in [
            ("tremor_tau_ms", self.tremor_tau_ms),
            ("perception_tau_ms", self.perception_tau_ms),
            ("cruise_speed", self.cruise_speed),
            ("turn_rate", self.turn_rate),
            ("brake_decel", self.brake_decel),
            ("liquid_turn_rate", self.liquid_turn_rate),
            ("creep_speed", self.creep_speed),
            ("alignment_ok_m", self.alignment_ok_m),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("operator.{name} must be positive")));
            }
        }
        for (name, p) in [
            ("liquid_misjudge_prob", self.liquid_misjudge_prob),
            ("premature_release_prob", self.premature_release_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("operator.{name} must be a probability")));
            }
        }
        if self.max_gesture_attempts == 0 {
            return Err(Error::Config("operator.max_gesture_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pair of stationary first-order autoregressive processes, used for hand
/// tremor on pitch and roll.
#[derive(Debug, Clone)]
pub struct Tremor {
    a: f64,
    noise: Normal<f64>,
    state: (f64, f64),
}

impl Tremor {
    pub fn new(std_deg: f64, tau_ms: f64, period_ms: f64) -> Self {
        let a = (-period_ms / tau_ms).exp();
        let innovation = std_deg * (1.0 - a * a).sqrt();
        Tremor {
            a,
            noise: Normal::new(0.0, innovation).expect("finite std"),
            state: (0.0, 0.0),
        }
    }

    pub fn sample(&mut self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        self.state.0 = self.a * self.state.0 + self.noise.sample(rng);
        self.state.1 = self.a * self.state.1 + self.noise.sample(rng);
        self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Align,
    Drive,
    Turn,
    Done,
}

/// Drives a polyline corner to corner: straight runs with braking before
/// each corner, turns in place, lateral correction from visual estimates.
#[derive(Debug, Clone)]
pub struct Driver {
    path: PathSpec,
    segment: usize,
    phase: Phase,
    params: OperatorParams,
    turn_rate: f64,
    cruise: f64,
    reaction_ms: f64,
    tremor: Tremor,
    /// Intents waiting out the reaction delay.
    pending: VecDeque<(i64, f64, f64)>,
    intent: (f64, f64),
    perception_error: f64,
    /// Slowly varying misjudgement of the lateral offset (second axis unused).
    perception: Tremor,
}

impl Driver {
    pub fn new(path: PathSpec, params: OperatorParams, rng: &mut ChaCha8Rng) -> Self {
        let reaction_ms = if params.reaction_ms.0 < params.reaction_ms.1 {
            rng.random_range(params.reaction_ms.0..params.reaction_ms.1)
        } else {
            params.reaction_ms.0
        };
        Driver {
            path,
            segment: 0,
            phase: Phase::Align,
            turn_rate: params.turn_rate,
            cruise: params.cruise_speed,
            tremor: Tremor::new(params.tremor_deg, params.tremor_tau_ms, INPUT_PERIOD_MS as f64),
            pending: VecDeque::new(),
            intent: (0.0, 0.0),
            perception_error: 0.0,
            perception: Tremor::new(params.perception_m, params.perception_tau_ms, INPUT_PERIOD_MS as f64),
            params,
            reaction_ms,
        }
    }

    pub fn with_turn_rate(mut self, rate: f64) -> Self {
        self.turn_rate = rate;
        self
    }

    pub fn with_cruise(mut self, speed: f64) -> Self {
        self.cruise = speed;
        self
    }

    pub fn done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn reaction_ms(&self) -> f64 {
        self.reaction_ms
    }

    /// Desired (vx, omega) from the robot state as the operator sees it.
    fn decide(&mut self, rig: &Rig) -> (f64, f64) {
        let wp = self.path.waypoints();
        let n_seg = wp.len() - 1;
        let pose = rig.world.pose;
        let vel = rig.world.vel;
        let lead = self.reaction_ms / 1000.0;
        loop {
            match self.phase {
                Phase::Done => return (0.0, 0.0),
                Phase::Align => {
                    let h = crate::sim::heading(wp[0], wp[1]);
                    let err = wrap_angle(h - pose.theta - vel.omega * lead);
                    if err.abs() < self.params.turn_done_deg.to_radians() && vel.omega.abs() < 0.1 {
                        self.phase = Phase::Drive;
                        continue;
                    }
                    let w = (self.params.turn_gain * err).clamp(-self.turn_rate, self.turn_rate);
                    return (0.0, w);
                }
                Phase::Drive => {
                    let (a, b) = (wp[self.segment], wp[self.segment + 1]);
                    let h = crate::sim::heading(a, b);
                    let (s, c) = h.sin_cos();
                    let rel = Point::new(pose.x - a.x, pose.y - a.y);
                    let along = rel.x * c + rel.y * s;
                    let lateral = -rel.x * s + rel.y * c + self.perception_error;
                    // Anticipate the motion that happens while the hand reacts.
                    let remaining = a.dist(b) - along - vel.vx.max(0.0) * lead;
                    if remaining <= 0.005 {
                        if self.segment + 1 == n_seg {
                            self.phase = Phase::Done;
                        } else {
                            self.phase = Phase::Turn;
                        }
                        continue;
                    }
                    let herr = wrap_angle(pose.theta - h);
                    let v = self
                        .cruise
                        .min((2.0 * self.params.brake_decel * remaining).sqrt())
                        .max(0.04);
                    let w = -self.params.heading_gain * herr - self.params.lateral_gain * lateral;
                    return (v, w);
                }
                Phase::Turn => {
                    let next = crate::sim::heading(wp[self.segment + 1], wp[self.segment + 2]);
                    let err = wrap_angle(next - pose.theta - vel.omega * lead);
                    if err.abs() < self.params.turn_done_deg.to_radians() && vel.omega.abs() < 0.1 {
                        self.segment += 1;
                        self.phase = Phase::Drive;
                        continue;
                    }
                    let w = (self.params.turn_gain * err).clamp(-self.turn_rate, self.turn_rate);
                    return (0.0, w);
                }
            }
        }
    }

    /// Produces this tick's tilt reading; intents reach the hand after the
    /// reaction delay and are overlaid with tremor.
    pub fn tick(&mut self, rig: &Rig, rng: &mut ChaCha8Rng) -> Result<TiltReading> {
        let now = rig.now_ms();
        self.perception_error = self.perception.sample(rng).0;
        let (v, w) = self.decide(rig);
        self.pending.push_back((now + self.reaction_ms as i64, v, w));
        while let Some(&(t, v, w)) = self.pending.front() {
            if t > now {
                break;
            }
            self.intent = (v, w);
            self.pending.pop_front();
        }
        let tp = &rig.tilt;
        let pitch = if self.intent.0 == 0.0 { 0.0 } else { tp.angle_for(self.intent.0 / tp.v_max) };
        let roll = if self.intent.1 == 0.0 { 0.0 } else { tp.angle_for(self.intent.1 / tp.omega_max) };
        let (np, nr) = self.tremor.sample(rng);
        TiltReading::new((pitch + np).clamp(-90.0, 90.0), (roll + nr).clamp(-90.0, 90.0), now)
    }

    /// Runs the route to completion or until `timeout_ms`; returns whether it finished.
    pub fn run(&mut self, rig: &mut Rig, rng: &mut ChaCha8Rng, timeout_ms: i64) -> Result<bool> {
        if rig.control.mode() != Mode::Movement {
            return Err(Error::Action("driving requires movement mode".into()));
        }
        let deadline = rig.now_ms() + timeout_ms;
        while rig.now_ms() < deadline {
            let reading = self.tick(rig, rng)?;
            rig.tilt(&reading);
            rig.advance(INPUT_PERIOD_MS)?;
            let settled = rig.world.vel.speed() < 1e-3 && rig.world.vel.omega.abs() < 1e-3;
            if self.done() && self.intent == (0.0, 0.0) && settled {
                return Ok(true);
            }
        }
        Ok(false)
    }
}
