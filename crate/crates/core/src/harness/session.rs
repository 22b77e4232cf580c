//! Live session core shared by `serve` and `replay`: client messages are
//! applied at the simulated time they arrive, and everything the server emits
//! is a deterministic function of that input log.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rig::{Rig, RigEvent, TimedRigEvent, INPUT_PERIOD_MS, STEP_MS};
use super::Setup;
use crate::config::Scenario;
use crate::control::{force_bin, ButtonEvent, ControlState, GripCommand, Mode, TiltReading};
use crate::error::{Error, Result};
use crate::gesture::{ForceLevel, Gesture};
use crate::link::Command;
use crate::sim::{Metrics, ObjectState, Pose, ReleaseStrategy, Velocity, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripAction {
    Close,
    Lower,
    Raise,
    Release,
}

/// Messages accepted from the operator console.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Tilt {
        pitch_deg: f64,
        roll_deg: f64,
    },
    Button {
        pressed: bool,
    },
    Grip {
        action: GripAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<u8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strategy: Option<ReleaseStrategy>,
    },
    Estop {
        engaged: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub state: ObjectState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub t_ms: i64,
    pub mode: Mode,
    pub pose: Pose,
    pub velocity: Velocity,
    pub estop: bool,
    pub arm_lowered: bool,
    pub grip_level: Option<u8>,
    pub grip_force_n: f64,
    pub force_bin: u8,
    pub feedback: Option<u8>,
    pub held: Option<String>,
    pub objects: Vec<ObjectView>,
    /// Events since the previous telemetry message.
    pub events: Vec<TimedRigEvent>,
}

/// Messages sent to the operator console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Telemetry(Telemetry),
    Feedback { t_ms: i64, index: u8, force_n: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub duration_ms: i64,
    pub sim: Metrics,
    pub mode_changes: u32,
    pub grasps: u32,
    pub releases: u32,
    pub feedback_cues: u32,
    pub rejected: u32,
}

impl SessionMetrics {
    pub fn from_events(duration_ms: i64, sim: Metrics, events: &[TimedRigEvent]) -> Self {
        let count = |f: fn(&RigEvent) -> bool| events.iter().filter(|e| f(&e.event)).count() as u32;
        SessionMetrics {
            duration_ms,
            sim,
            mode_changes: count(|e| matches!(e, RigEvent::Mode { .. })),
            grasps: count(|e| matches!(e, RigEvent::Grasp { .. })),
            releases: count(|e| matches!(e, RigEvent::Release { .. })),
            feedback_cues: count(|e| matches!(e, RigEvent::Feedback { .. })),
            rejected: count(|e| matches!(e, RigEvent::Rejected { .. })),
        }
    }
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Start {
        seed: u64,
        telemetry_hz: f64,
        setup: Box<Setup>,
        scenario: Box<Scenario>,
    },
    Input {
        t_ms: i64,
        msg: ClientMessage,
    },
    Output {
        msg: ServerMessage,
    },
    End {
        t_ms: i64,
        metrics: SessionMetrics,
    },
}

pub struct Session {
    rig: Rig,
    telemetry_period_ms: i64,
    next_telemetry_ms: i64,
    event_cursor: usize,
    last_cue: Option<u8>,
    tilt: (f64, f64),
    log: Vec<LogRecord>,
}

/// Catalog objects lie along the course path every 0.8 m, starting 0.8 m from the start.
fn object_positions(scenario: &Scenario) -> Vec<crate::sim::Point> {
    let len = scenario.course.path.length();
    (0..scenario.catalog.len())
        .map(|i| scenario.course.path.at((0.8 * (i + 1) as f64).min(len)).0)
        .collect()
}

impl Session {
    pub fn new(setup: &Setup, scenario: &Scenario, seed: u64, telemetry_hz: f64) -> Result<Self> {
        if !(20.0..=1000.0).contains(&telemetry_hz) {
            return Err(Error::Config(format!("telemetry rate {telemetry_hz} Hz outside [20, 1000]")));
        }
        let mut world = World::new(
            setup.robot.clone(),
            scenario.course.start_pose(),
            scenario.course.obstacles.clone(),
            seed,
        )?;
        for (spec, at) in scenario.catalog.iter().zip(object_positions(scenario)) {
            world.add_object(spec.clone(), at)?;
        }
        let rig = Rig::new(
            world,
            ControlState::new(setup.button),
            setup.tilt,
            setup.feedback,
            setup.link_for(seed),
        )?;
        // Telemetry times are whole physics steps.
        let period = ((1000.0 / telemetry_hz / STEP_MS as f64).floor() as i64).max(1) * STEP_MS;
        Ok(Session {
            rig,
            telemetry_period_ms: period,
            next_telemetry_ms: 0,
            event_cursor: 0,
            last_cue: None,
            tilt: (0.0, 0.0),
            log: vec![LogRecord::Start {
                seed,
                telemetry_hz,
                setup: Box::new(setup.clone()),
                scenario: Box::new(scenario.clone()),
            }],
        })
    }

    pub fn now_ms(&self) -> i64 {
        self.rig.now_ms()
    }

    pub fn rig(&self) -> &Rig {
        &self.rig
    }

    pub fn telemetry_period_ms(&self) -> i64 {
        self.telemetry_period_ms
    }

    /// Applies a client message at the current time. Invalid messages are
    /// rejected without touching the session or the log.
    pub fn apply(&mut self, msg: ClientMessage) -> Result<()> {
        let t = self.now_ms();
        match msg {
            ClientMessage::Tilt { pitch_deg, roll_deg } => {
                let reading = TiltReading::new(pitch_deg, roll_deg, t)?;
                self.tilt = (pitch_deg, roll_deg);
                self.rig.tilt(&reading);
            }
            ClientMessage::Button { pressed } => {
                if pressed == self.rig.control.button_down() {
                    return Err(Error::RejectedInput(format!("button already {}", if pressed { "down" } else { "up" })));
                }
                let ev = if pressed { ButtonEvent::press(t) } else { ButtonEvent::release(t) };
                self.rig.button(ev)?;
                // Mode changes are streamed at once so velocity follows the mode.
                self.stream_tilt();
            }
            ClientMessage::Grip { action, level, strategy } => {
                if self.rig.control.mode() != Mode::Grasp {
                    return Err(Error::RejectedInput("grip messages need grasp mode".into()));
                }
                match action {
                    GripAction::Close => {
                        let level = level
                            .and_then(ForceLevel::from_number)
                            .ok_or_else(|| Error::RejectedInput(format!("grip level {level:?} outside 1..=3")))?;
                        self.rig.grip(GripCommand {
                            gesture: Gesture::Grip,
                            level,
                        });
                    }
                    GripAction::Lower | GripAction::Raise => {
                        self.rig.send(&Command::Arm {
                            lowered: action == GripAction::Lower,
                        });
                    }
                    GripAction::Release => {
                        self.rig.send(&Command::Release(strategy.unwrap_or(ReleaseStrategy::Standard)));
                    }
                }
            }
            ClientMessage::Estop { engaged } => self.rig.emergency_stop(engaged)?,
        }
        self.log.push(LogRecord::Input { t_ms: t, msg });
        Ok(())
    }

    fn stream_tilt(&mut self) {
        let (p, r) = self.tilt;
        let reading = TiltReading::new(p, r, self.now_ms()).expect("validated when received");
        self.rig.tilt(&reading);
    }

    /// Advances by `ms` (rounded up to whole steps) and returns what the
    /// server sends: telemetry at its fixed rate and feedback on cue changes.
    pub fn advance(&mut self, ms: i64) -> Result<Vec<ServerMessage>> {
        let mut out = Vec::new();
        let end = self.now_ms() + ms.max(0);
        if self.now_ms() >= self.next_telemetry_ms {
            out.push(self.telemetry());
        }
        while self.now_ms() < end {
            if self.now_ms() % INPUT_PERIOD_MS == 0 {
                self.stream_tilt();
            }
            self.rig.advance(STEP_MS)?;
            let cue = self.rig.operator_cue();
            if cue != self.last_cue {
                self.last_cue = cue;
                if let Some(index) = cue {
                    out.push(ServerMessage::Feedback {
                        t_ms: self.now_ms(),
                        index,
                        force_n: self.rig.world.grip_force(),
                    });
                }
            }
            if self.now_ms() >= self.next_telemetry_ms {
                out.push(self.telemetry());
            }
        }
        self.log.extend(out.iter().cloned().map(|msg| LogRecord::Output { msg }));
        Ok(out)
    }

    fn telemetry(&mut self) -> ServerMessage {
        self.next_telemetry_ms = self.now_ms() + self.telemetry_period_ms;
        let world = &self.rig.world;
        let events = self.rig.events()[self.event_cursor..].to_vec();
        self.event_cursor = self.rig.events().len();
        let f = world.grip_force();
        ServerMessage::Telemetry(Telemetry {
            t_ms: self.now_ms(),
            mode: self.rig.control.mode(),
            pose: world.pose,
            velocity: world.vel,
            estop: world.estop_latched(),
            arm_lowered: world.arm() < 1e-9,
            grip_level: self.rig.control.grip_level.map(ForceLevel::number),
            grip_force_n: f,
            force_bin: force_bin(f, self.rig.feedback.f_max_n),
            feedback: self.rig.control.feedback_index,
            held: world.held().map(|i| world.objects[i].spec.name.clone()),
            objects: world
                .objects
                .iter()
                .map(|o| ObjectView {
                    name: o.spec.name.clone(),
                    x: o.position.x,
                    y: o.position.y,
                    state: o.state,
                })
                .collect(),
            events,
        })
    }

    pub fn metrics(&self) -> SessionMetrics {
        SessionMetrics::from_events(self.now_ms(), self.rig.world.metrics(), self.rig.events())
    }

    /// Log records produced since the last call.
    pub fn drain_log(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.log)
    }

    /// Closes the session; the returned records end with the metrics.
    pub fn finish(mut self) -> (SessionMetrics, Vec<LogRecord>) {
        let metrics = self.metrics();
        self.log.push(LogRecord::End {
            t_ms: self.now_ms(),
            metrics,
        });
        (metrics, self.log)
    }
}

pub fn write_log_records(out: &mut impl Write, records: &[LogRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: LogRecord = serde_json::from_str(&line)
            .map_err(|e| Error::RejectedInput(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(r);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub inputs: usize,
    pub outputs: usize,
    /// Index of the first output that differs from the log.
    pub first_mismatch: Option<usize>,
    pub logged: Option<SessionMetrics>,
    pub replayed: SessionMetrics,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.first_mismatch.is_none() && self.logged == Some(self.replayed)
    }
}

/// Re-runs the logged inputs as a scripted session and compares every
/// server message and the final metrics with the log.
pub fn replay(records: &[LogRecord]) -> Result<ReplayReport> {
    let Some(LogRecord::Start {
        seed,
        telemetry_hz,
        setup,
        scenario,
    }) = records.first()
    else {
        return Err(Error::RejectedInput("session log does not start with a start record".into()));
    };
    let scenario = (**scenario).clone().checked()?;
    let mut session = Session::new(setup, &scenario, *seed, *telemetry_hz)?;
    let logged_out: Vec<&ServerMessage> = records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Output { msg } => Some(msg),
            _ => None,
        })
        .collect();
    let mut produced = Vec::new();
    let mut inputs = 0;
    let mut logged = None;
    for r in &records[1..] {
        match r {
            LogRecord::Input { t_ms, msg } => {
                if *t_ms < session.now_ms() {
                    return Err(Error::RejectedInput(format!("input at {t_ms} ms precedes {} ms", session.now_ms())));
                }
                produced.extend(session.advance(t_ms - session.now_ms())?);
                session.apply(*msg)?;
                inputs += 1;
            }
            LogRecord::End { t_ms, metrics } => {
                produced.extend(session.advance(t_ms - session.now_ms())?);
                logged = Some(*metrics);
            }
            LogRecord::Output { .. } => {}
            LogRecord::Start { .. } => return Err(Error::RejectedInput("second start record in session log".into())),
        }
    }
    let first_mismatch = (0..produced.len().max(logged_out.len()))
        .find(|&i| produced.get(i) != logged_out.get(i).copied());
    Ok(ReplayReport {
        inputs,
        outputs: produced.len(),
        first_mismatch,
        logged,
        replayed: session.metrics(),
    })
}
