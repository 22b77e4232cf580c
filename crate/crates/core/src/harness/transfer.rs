use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{Driver, OperatorParams};
use super::recognition::{live_subject_gain, live_window, RecognitionParams};
use super::report::{self, mean};
use super::rig::{Rig, RigEvent};
use super::Setup;
use crate::classifier::ModelCheckpoint;
use crate::control::{ControlState, GripCommand, Mode, SLIP_CUE};
use crate::error::{Error, Result};
use crate::gesture::{ForceLevel, Gesture, GestureClass};
use crate::link::Command;
use crate::rng::{derive_seed, rng_for};
use crate::sim::{
    EventKind, GraspOutcome, ObjectSpec, PathSpec, Point, Pose, ReleaseOutcome, ReleaseStrategy, Texture, World,
};
use crate::synth::{default_profiles, DatasetSpec, GestureProfile};

pub const REQUIRED_OBJECTS: [&str; 3] = ["watch", "earphones", "water_cup"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    pub trials_per_combo: usize,
    pub time_limit_s: f64,
    /// Operator reacts to slip cues by requesting a stronger grip.
    pub slip_feedback: bool,
    /// Distance driven to the pick-up point.
    pub approach_m: f64,
    /// Length of each of the two transport legs around a right-angle turn.
    pub leg_m: f64,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            trials_per_combo: 5,
            time_limit_s: 40.0,
            slip_feedback: true,
            approach_m: 0.8,
            leg_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferTrial {
    pub object: String,
    pub texture: Texture,
    pub trial: usize,
    pub seed: u64,
    pub required_n: f64,
    pub chosen_level: u8,
    pub final_force_n: f64,
    pub gestures: u32,
    pub grasp: Option<GraspOutcome>,
    pub grip_success: bool,
    pub dropped: bool,
    pub spilled: bool,
    pub transport_s: f64,
    pub transport_success: bool,
    pub release: Option<ReleaseOutcome>,
    pub release_success: bool,
    pub full_success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub trials: usize,
    pub grip_rate: f64,
    pub transport_rate: f64,
    /// Among trials that reached the release.
    pub release_rate: f64,
    pub full_rate: f64,
    pub mean_transport_s: f64,
    pub cup_release_spills: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub trials: Vec<TransferTrial>,
    pub summary: TransferSummary,
    pub slip_feedback: bool,
}

pub fn summarize_transfer(trials: &[TransferTrial]) -> TransferSummary {
    let n = trials.len().max(1) as f64;
    let frac = |f: &dyn Fn(&TransferTrial) -> bool| trials.iter().filter(|t| f(t)).count() as f64 / n;
    let released: Vec<_> = trials.iter().filter(|t| t.release.is_some()).collect();
    TransferSummary {
        trials: trials.len(),
        grip_rate: frac(&|t| t.grip_success),
        transport_rate: frac(&|t| t.transport_success),
        release_rate: if released.is_empty() {
            0.0
        } else {
            released.iter().filter(|t| t.release_success).count() as f64 / released.len() as f64
        },
        full_rate: frac(&|t| t.full_success),
        mean_transport_s: mean(trials.iter().filter(|t| t.grip_success).map(|t| t.transport_s)),
        cup_release_spills: trials
            .iter()
            .filter(|t| t.object == "water_cup" && t.release == Some(ReleaseOutcome::Spilled))
            .count(),
    }
}

pub fn validate_catalog(catalog: &[ObjectSpec]) -> Result<()> {
    for name in REQUIRED_OBJECTS {
        if !catalog.iter().any(|o| o.name == name) {
            return Err(Error::Config(format!("object catalog lacks {name:?}")));
        }
    }
    for o in catalog {
        o.validate()?;
    }
    Ok(())
}

/// Gesture recognizer seen by the policy: the trained model on synthetic
/// live windows, or an ideal recognizer when no checkpoint is given.
struct Recognizer<'a> {
    ckpt: Option<&'a ModelCheckpoint>,
    profiles: BTreeMap<GestureClass, GestureProfile>,
    data: &'a DatasetSpec,
    gain: f64,
    window_ms: i64,
    processing_ms: i64,
}

impl Recognizer<'_> {
    fn recognize(&self, class: GestureClass, seed: u64) -> Result<GestureClass> {
        match self.ckpt {
            None => Ok(class),
            Some(c) => Ok(c.predict(&live_window(&self.profiles, self.data, class, self.gain, seed)?)?.class),
        }
    }
}

fn stronger(level: ForceLevel) -> ForceLevel {
    match level {
        ForceLevel::L3Light => ForceLevel::L2Moderate,
        _ => ForceLevel::L1Strong,
    }
}

/// Gentlest level whose force covers the estimate with a 15% margin.
fn choose_level(estimate: f64, setup: &Setup) -> ForceLevel {
    [ForceLevel::L3Light, ForceLevel::L2Moderate, ForceLevel::L1Strong]
        .into_iter()
        .find(|&l| setup.feedback.level_force_n(l) >= 1.15 * estimate)
        .unwrap_or(ForceLevel::L1Strong)
}

fn enter(rig: &mut Rig, mode: Mode, setup: &Setup) -> Result<()> {
    if rig.control.mode() == mode {
        return Ok(());
    }
    let got = match mode {
        Mode::Movement => rig.press_for(setup.button.hold_ms + 100)?,
        Mode::Grasp => {
            rig.press_for(100)?;
            rig.advance(150)?;
            rig.press_for(100)?
        }
        Mode::Idle => return Err(Error::Action("no gesture returns to idle".into())),
    };
    if got != mode {
        return Err(Error::Session(format!("button gesture reached {got:?} instead of {mode:?}")));
    }
    Ok(())
}

fn drive(
    rig: &mut Rig,
    setup: &Setup,
    op: &OperatorParams,
    to: &[Point],
    turn_rate: f64,
    cruise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    enter(rig, Mode::Movement, setup)?;
    let mut wp = vec![rig.world.pose.point()];
    wp.extend(to.iter().copied().filter(|p| p.dist(rig.world.pose.point()) > 1e-6));
    if wp.len() < 2 {
        return Ok(true);
    }
    let path = PathSpec::new(wp)?;
    let mut d = Driver::new(path, *op, rng).with_turn_rate(turn_rate).with_cruise(cruise);
    d.run(rig, rng, 60_000)
}

/// Creeps until the operator judges the lowered gripper to be over `object`:
/// face the object, then roll forward slowly.
fn fine_approach(rig: &mut Rig, setup: &Setup, op: &OperatorParams, object: Point, rng: &mut ChaCha8Rng) -> Result<()> {
    let reach = setup.robot.gripper_base_m + setup.robot.arm_reach_m;
    let noise = Normal::new(0.0, op.alignment_perception_m).expect("finite std");
    for _ in 0..3 {
        let pose = rig.world.pose;
        let (s, c) = pose.theta.sin_cos();
        let g = Point::new(pose.x + reach * c, pose.y + reach * s);
        let seen = Point::new(object.x + noise.sample(rng), object.y + noise.sample(rng));
        if g.dist(seen) <= op.alignment_ok_m {
            break;
        }
        let (dx, dy) = (seen.x - pose.x, seen.y - pose.y);
        let d = dx.hypot(dy);
        if d <= reach {
            break;
        }
        let stop = Point::new(pose.x + dx * (d - reach) / d, pose.y + dy * (d - reach) / d);
        drive(rig, setup, op, &[stop], op.turn_rate, op.creep_speed, rng)?;
    }
    Ok(())
}

fn last_grasp(rig: &Rig, since: usize) -> Option<GraspOutcome> {
    rig.events()[since..].iter().rev().find_map(|e| match e.event {
        RigEvent::Grasp { outcome, .. } => Some(outcome),
        _ => None,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn transfer_trial(
    setup: &Setup,
    op: &OperatorParams,
    params: &TransferParams,
    object: &ObjectSpec,
    texture: Texture,
    recognizer_ckpt: Option<&ModelCheckpoint>,
    data: &DatasetSpec,
    rec: &RecognitionParams,
    subject: usize,
    seed: u64,
) -> Result<TransferTrial> {
    let obj = object.clone().with_texture(texture);
    let required = obj.required_force();
    let reach = setup.robot.gripper_base_m + setup.robot.arm_reach_m;
    let mut world = World::new(setup.robot.clone(), Pose::default(), vec![], seed)?;
    let target = Point::new(params.approach_m + reach, 0.0);
    let id = world.add_object(obj.clone(), target)?;
    let mut rig = Rig::new(world, ControlState::new(setup.button), setup.tilt, setup.feedback, setup.link_for(seed))?;
    let recognizer = Recognizer {
        ckpt: recognizer_ckpt,
        profiles: default_profiles(),
        data,
        gain: live_subject_gain(seed, subject, rec.subject_jitter),
        window_ms: (data.window_s * 1000.0).round() as i64,
        processing_ms: rec.processing_ms.round() as i64,
    };
    // Independent streams so that policy branches do not shift later draws.
    let mut drive_rng = rng_for(seed, &[0xd41e]);
    let mut judge_rng = rng_for(seed, &[0x1d9e]);
    let mut release_rng = rng_for(seed, &[0x4e1e]);

    let mut trial = TransferTrial {
        object: obj.name.clone(),
        texture,
        trial: 0,
        seed,
        required_n: required,
        chosen_level: 0,
        final_force_n: 0.0,
        gestures: 0,
        grasp: None,
        grip_success: false,
        dropped: false,
        spilled: false,
        transport_s: 0.0,
        transport_success: false,
        release: None,
        release_success: false,
        full_success: false,
    };

    // Approach short of the object, then line up.
    drive(&mut rig, setup, op, &[Point::new(params.approach_m - 0.08, 0.0)], op.turn_rate, op.cruise_speed, &mut drive_rng)?;
    fine_approach(&mut rig, setup, op, target, &mut drive_rng)?;
    enter(&mut rig, Mode::Grasp, setup)?;
    rig.send(&Command::Arm { lowered: true });
    rig.advance(300)?;
    let spread = Normal::new(0.0, op.force_estimate_spread).expect("finite spread");
    let mut estimate = required * spread.sample(&mut judge_rng).exp();
    if obj.liquid && judge_rng.random::<f64>() < op.liquid_misjudge_prob {
        // Judged as if the container were empty.
        estimate *= 1.0 - obj.fill * 0.8;
    }
    let mut level = choose_level(estimate, setup);
    trial.chosen_level = level.number();
    let mut realigned = false;
    while trial.gestures < op.max_gesture_attempts {
        let intended = GestureClass::new(Gesture::Grip, level);
        let gseed = derive_seed(seed, &[0x6e57, trial.gestures as u64]);
        trial.gestures += 1;
        let seen = recognizer.recognize(intended, gseed)?;
        rig.advance(recognizer.window_ms + recognizer.processing_ms)?;
        let mark = rig.events().len();
        rig.grip(GripCommand {
            gesture: seen.gesture,
            level: seen.level,
        });
        let reaction = judge_rng.random_range(op.reaction_ms.0..=op.reaction_ms.1.max(op.reaction_ms.0));
        rig.advance(reaction.round() as i64 + 100)?;
        if let Some(o) = last_grasp(&rig, mark) {
            trial.grasp = Some(o);
        }
        match trial.grasp {
            Some(GraspOutcome::Damaged) => break,
            Some(GraspOutcome::Missed) if !realigned => {
                // Back off, line up again and retry once.
                realigned = true;
                trial.grasp = None;
                fine_approach(&mut rig, setup, op, target, &mut drive_rng)?;
                enter(&mut rig, Mode::Grasp, setup)?;
                rig.send(&Command::Arm { lowered: true });
                rig.advance(300)?;
            }
            Some(GraspOutcome::Missed) => break,
            Some(GraspOutcome::Held) | Some(GraspOutcome::Slip) => {
                if rig.world.held().is_none() {
                    break;
                }
                if params.slip_feedback && rig.operator_cue() == Some(SLIP_CUE) && level != ForceLevel::L1Strong {
                    level = stronger(level);
                } else {
                    break;
                }
            }
            None => {}
        }
    }
    trial.final_force_n = rig.world.grip_force();

    // Lift and check the hold.
    rig.send(&Command::Arm { lowered: false });
    let lift_start = rig.now_ms();
    rig.advance(setup.robot.drop_after_ms + 300)?;
    trial.grip_success = rig.world.held() == Some(id);
    trial.dropped = rig.world.events().iter().any(|e| e.kind == EventKind::Drop);
    if !trial.grip_success {
        return Ok(trial);
    }

    // Transport around a right-angle corner.
    let turn_rate = if obj.liquid { op.liquid_turn_rate } else { op.turn_rate };
    let p0 = rig.world.pose.point();
    let leg1 = Point::new(p0.x + params.leg_m, p0.y);
    let leg2 = Point::new(leg1.x, leg1.y + params.leg_m);
    drive(&mut rig, setup, op, &[leg1, leg2], turn_rate, op.cruise_speed, &mut drive_rng)?;

    // Place.
    enter(&mut rig, Mode::Grasp, setup)?;
    let strategy = if obj.liquid {
        ReleaseStrategy::Gradual
    } else {
        ReleaseStrategy::Standard
    };
    if release_rng.random::<f64>() >= op.premature_release_prob {
        rig.send(&Command::Arm { lowered: true });
        rig.advance(300)?;
    }
    for _ in 0..3 {
        let mark = rig.events().len();
        rig.send(&Command::Release(strategy));
        rig.advance(100 + strategy.duration_ms())?;
        let outcome = rig.events()[mark..].iter().find_map(|e| match e.event {
            RigEvent::Release { outcome, .. } => Some(outcome),
            _ => None,
        });
        if outcome.is_some() {
            trial.release = outcome;
            break;
        }
        rig.advance(500)?;
    }
    trial.transport_s = (rig.now_ms() - lift_start) as f64 / 1000.0;
    let ev = rig.world.events();
    trial.dropped = ev.iter().any(|e| e.kind == EventKind::Drop);
    trial.spilled = ev.iter().any(|e| e.kind == EventKind::Spill);
    trial.transport_success = !trial.dropped && !trial.spilled && trial.transport_s <= params.time_limit_s;
    trial.release_success = trial.release == Some(ReleaseOutcome::Placed);
    trial.full_success = trial.grip_success && trial.transport_success && trial.release_success;
    Ok(trial)
}

#[allow(clippy::too_many_arguments)]
pub fn run_transfer(
    setup: &Setup,
    catalog: &[ObjectSpec],
    params: &TransferParams,
    ckpt: Option<&ModelCheckpoint>,
    data: &DatasetSpec,
    rec: &RecognitionParams,
    seed: u64,
) -> Result<TransferReport> {
    validate_catalog(catalog)?;
    setup.operator.validate()?;
    if params.trials_per_combo == 0 || !(params.time_limit_s > 0.0) {
        return Err(Error::Config("transfer needs at least one trial per combination and a positive time limit".into()));
    }
    let objects: Vec<&ObjectSpec> = REQUIRED_OBJECTS
        .iter()
        .map(|n| catalog.iter().find(|o| o.name == *n).expect("validated"))
        .collect();
    let jobs: Vec<(usize, Texture, usize)> = (0..objects.len())
        .flat_map(|o| Texture::ALL.into_iter().flat_map(move |t| (0..params.trials_per_combo).map(move |k| (o, t, k))))
        .collect();
    let subjects = rec.subjects.max(1);
    let trials = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(o, t, k))| {
            let s = derive_seed(seed, &[0x7a5f, o as u64, t as u64, k as u64]);
            let subject = i % subjects;
            let op = setup.operator_variant(seed, subject as u64);
            let mut tr = transfer_trial(setup, &op, params, objects[o], t, ckpt, data, rec, subject, s)?;
            tr.trial = k;
            Ok(tr)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_transfer(&trials);
    Ok(TransferReport {
        trials,
        summary,
        slip_feedback: params.slip_feedback,
    })
}

impl TransferReport {
    pub fn table(&self) -> String {
        let s = &self.summary;
        let mut rows: Vec<(String, String)> = Vec::new();
        for name in REQUIRED_OBJECTS {
            for t in Texture::ALL {
                let group: Vec<_> = self.trials.iter().filter(|r| r.object == name && r.texture == t).collect();
                if group.is_empty() {
                    continue;
                }
                let c = |f: fn(&TransferTrial) -> bool| group.iter().filter(|r| f(r)).count();
                rows.push((
                    format!("{name} / {}", t.label()),
                    format!(
                        "grip {}/{}  transport {}/{}  release {}/{}  full {}/{}",
                        c(|r| r.grip_success),
                        group.len(),
                        c(|r| r.transport_success),
                        group.len(),
                        c(|r| r.release_success),
                        c(|r| r.release.is_some()),
                        c(|r| r.full_success),
                        group.len()
                    ),
                ));
            }
        }
        rows.extend([
            ("trials".to_string(), s.trials.to_string()),
            ("slip feedback".to_string(), if self.slip_feedback { "on" } else { "off" }.to_string()),
            ("grip success".to_string(), format!("{:.1}%", 100.0 * s.grip_rate)),
            ("transport success".to_string(), format!("{:.1}%", 100.0 * s.transport_rate)),
            ("release success".to_string(), format!("{:.1}%", 100.0 * s.release_rate)),
            ("full-task success".to_string(), format!("{:.1}%", 100.0 * s.full_rate)),
            ("mean transport time (s)".to_string(), format!("{:.2}", s.mean_transport_s)),
        ]);
        let borrowed: Vec<(&str, String)> = rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        report::table(
            "Transfer: grasp, transport and release",
            &borrowed,
            &[
                "Reference: 93.3% grip, 95.6% release, 91.1% full-task success.",
                "Trial counts are configurable; the reference rates imply 45 trials (9 combinations x 5).",
            ],
        )
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        report::emit(dir, "transfer", &self.trials, &self.summary, &self.table())
    }
}
