//! Wearable, radio link and robot wired together on one simulated clock.

use serde::{Deserialize, Serialize};

use crate::control::{
    force_to_feedback, tilt_to_velocity, ButtonEvent, ControlState, FeedbackParams, GripCommand, Mode, TiltParams,
    TiltReading, VelocityCommand,
};
use crate::error::Result;
use crate::gesture::Gesture;
use crate::link::{Channel, Command, LinkConfig};
use crate::sim::{GraspOutcome, ReleaseOutcome, ReleaseStrategy, SimEvent, World};

/// Operator input period (50 Hz).
pub const INPUT_PERIOD_MS: i64 = 20;
/// Physics step.
pub const STEP_MS: i64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RigEvent {
    Mode { mode: Mode },
    Grasp { object: usize, outcome: GraspOutcome },
    Release { object: usize, outcome: ReleaseOutcome },
    Rejected { reason: String },
    Sim { event: SimEvent },
    Feedback { index: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedRigEvent {
    pub t_ms: i64,
    #[serde(flatten)]
    pub event: RigEvent,
}

#[derive(Debug, Clone)]
pub struct Rig {
    pub world: World,
    pub control: ControlState,
    pub tilt: TiltParams,
    pub feedback: FeedbackParams,
    uplink: Channel,
    downlink: Channel,
    robot_vel: VelocityCommand,
    robot_cue: Option<u8>,
    /// Cue last received by the wearable.
    operator_cue: Option<u8>,
    events: Vec<TimedRigEvent>,
    latencies_ms: Vec<f64>,
}

impl Rig {
    pub fn new(
        world: World,
        control: ControlState,
        tilt: TiltParams,
        feedback: FeedbackParams,
        link: LinkConfig,
    ) -> Result<Self> {
        Ok(Rig {
            world,
            control,
            tilt,
            feedback,
            uplink: Channel::new(link, 0)?,
            downlink: Channel::new(link, 1)?,
            robot_vel: VelocityCommand::zero(0),
            robot_cue: None,
            operator_cue: None,
            events: Vec::new(),
            latencies_ms: Vec::new(),
        })
    }

    pub fn now_ms(&self) -> i64 {
        self.world.clock_ms()
    }

    pub fn events(&self) -> &[TimedRigEvent] {
        &self.events
    }

    /// One-way delivery latency of every delivered uplink frame.
    pub fn latencies_ms(&self) -> &[f64] {
        &self.latencies_ms
    }

    pub fn operator_cue(&self) -> Option<u8> {
        self.operator_cue
    }

    pub fn robot_velocity(&self) -> VelocityCommand {
        self.robot_vel
    }

    fn log(&mut self, event: RigEvent) {
        self.events.push(TimedRigEvent {
            t_ms: self.now_ms(),
            event,
        });
    }

    /// Sends a command over the uplink and returns the first delivery time.
    pub fn send(&mut self, cmd: &Command) -> Option<f64> {
        let now = self.now_ms() as f64;
        let r = self.uplink.send(cmd, now);
        let first = r.deliveries.first().copied();
        if let Some(t) = first {
            self.latencies_ms.push(t - now);
        }
        first
    }

    pub fn button(&mut self, ev: ButtonEvent) -> Result<Mode> {
        let before = self.control.mode();
        let mode = self.control.on_button(ev)?;
        if mode != before {
            self.log(RigEvent::Mode { mode });
        }
        Ok(mode)
    }

    /// Press at the current time and release after `hold_ms`, advancing the clock.
    pub fn press_for(&mut self, hold_ms: i64) -> Result<Mode> {
        self.button(ButtonEvent::press(self.now_ms()))?;
        self.advance(hold_ms)?;
        self.button(ButtonEvent::release(self.now_ms()))
    }

    /// Maps a tilt reading through the current mode and streams it.
    pub fn tilt(&mut self, reading: &TiltReading) -> VelocityCommand {
        let v = tilt_to_velocity(self.control.mode(), reading, &self.tilt);
        self.send(&Command::Velocity {
            vx: v.vx,
            vy: v.vy,
            omega: v.omega,
        });
        v
    }

    /// Forwards a recognized gesture; only grip gestures in grasp mode reach the robot.
    pub fn grip(&mut self, cmd: GripCommand) -> bool {
        if cmd.gesture != Gesture::Grip || !self.control.apply_grip(cmd, &self.feedback) {
            return false;
        }
        self.send(&Command::Grip(cmd));
        true
    }

    pub fn estop(&mut self, engaged: bool) {
        self.send(&Command::Estop { engaged });
    }

    /// Stop line wired to the base: takes effect on the next step regardless
    /// of the radio, and is repeated over the link.
    pub fn emergency_stop(&mut self, engaged: bool) -> Result<()> {
        self.on_robot(Command::Estop { engaged })?;
        self.estop(engaged);
        Ok(())
    }

    /// Advances the clock by whole physics steps, delivering frames as they arrive.
    pub fn advance(&mut self, ms: i64) -> Result<()> {
        let end = self.now_ms() + ms;
        while self.now_ms() < end {
            let now = self.now_ms() as f64;
            for f in self.uplink.receive(now) {
                let cmd = Command::from_frame(&f)?;
                self.on_robot(cmd)?;
            }
            let dt = STEP_MS.min(end - self.now_ms());
            for event in self.world.step(&self.robot_vel, dt)? {
                self.log(RigEvent::Sim { event });
            }
            self.robot_feedback();
            let now = self.now_ms() as f64;
            for f in self.downlink.receive(now) {
                if let Command::Feedback { index, .. } = Command::from_frame(&f)? {
                    self.operator_cue = Some(index);
                    self.control.set_feedback(index);
                }
            }
        }
        Ok(())
    }

    fn nearest_object(&self) -> Option<usize> {
        let g = self.world.gripper();
        self.world
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o.state, crate::sim::ObjectState::Resting | crate::sim::ObjectState::Placed))
            .min_by(|a, b| g.dist(a.1.position).total_cmp(&g.dist(b.1.position)))
            .map(|(i, _)| i)
    }

    fn on_robot(&mut self, cmd: Command) -> Result<()> {
        match cmd {
            Command::Velocity { vx, vy, omega } => {
                self.robot_vel = VelocityCommand {
                    vx,
                    vy,
                    omega,
                    t_ms: self.now_ms(),
                }
            }
            Command::Estop { engaged } => {
                self.world.set_estop(engaged);
                if engaged {
                    self.robot_vel = VelocityCommand::zero(self.now_ms());
                }
            }
            Command::Grip(g) => {
                let force = self.feedback.level_force_n(g.level);
                if self.world.held().is_some() {
                    self.world.set_grip_force(force)?;
                } else if let Some(id) = self.nearest_object() {
                    match self.world.grasp(id, force) {
                        Ok(outcome) => self.log(RigEvent::Grasp { object: id, outcome }),
                        Err(e) => self.log(RigEvent::Rejected { reason: e.to_string() }),
                    }
                }
            }
            Command::Arm { lowered } => {
                let angle = if lowered { 0.0 } else { std::f64::consts::FRAC_PI_2 };
                self.world.set_arm(angle)?;
            }
            Command::Release(strategy) => self.robot_release(strategy),
            Command::Feedback { .. } | Command::Ack { .. } => {}
        }
        Ok(())
    }

    fn robot_release(&mut self, strategy: ReleaseStrategy) {
        let id = self.world.held();
        match self.world.release(strategy) {
            Ok(outcome) => self.log(RigEvent::Release {
                object: id.unwrap_or_default(),
                outcome,
            }),
            Err(e) => self.log(RigEvent::Rejected { reason: e.to_string() }),
        }
    }

    /// Robot-side cue computation; cues are sent only when they change.
    fn robot_feedback(&mut self) {
        let cue = self.world.held().map(|_| {
            force_to_feedback(self.world.grip_force(), self.world.slipping(), false, self.feedback.f_max_n)
                .expect("grip force is non-negative")
        });
        if cue != self.robot_cue {
            self.robot_cue = cue;
            if let Some(index) = cue {
                self.log(RigEvent::Feedback { index });
                let now = self.now_ms() as f64;
                self.downlink.send(
                    &Command::Feedback {
                        index,
                        force_n: self.world.grip_force(),
                    },
                    now,
                );
            }
        }
    }
}
