use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{Driver, OperatorParams};
use super::report::{self, mean};
use super::rig::Rig;
use super::Setup;
use crate::control::{ControlState, Mode};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::sim::{trajectory_deviation, Course, Point, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigationParams {
    pub trials: usize,
    /// Distinct simulated operators; trials are assigned round-robin.
    pub operators: usize,
    pub timeout_s: f64,
}

impl Default for NavigationParams {
    fn default() -> Self {
        NavigationParams {
            trials: 100,
            operators: 5,
            timeout_s: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavTrial {
    pub trial: usize,
    pub operator: usize,
    pub seed: u64,
    pub completed: bool,
    pub collisions: u32,
    pub estops: u32,
    pub completion_s: f64,
    pub deviation_cm: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavSummary {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub collisions: u32,
    pub mean_completion_s: f64,
    pub mean_deviation_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationReport {
    pub trials: Vec<NavTrial>,
    pub summary: NavSummary,
}

/// Aggregates recomputed from the trial records alone.
pub fn summarize_navigation(trials: &[NavTrial]) -> NavSummary {
    let successes = trials.iter().filter(|t| t.success).count();
    NavSummary {
        trials: trials.len(),
        successes,
        success_rate: if trials.is_empty() { 0.0 } else { successes as f64 / trials.len() as f64 },
        collisions: trials.iter().map(|t| t.collisions).sum(),
        mean_completion_s: mean(trials.iter().filter(|t| t.completed).map(|t| t.completion_s)),
        mean_deviation_cm: mean(trials.iter().map(|t| t.deviation_cm)),
    }
}

/// Checks the route has the three right-angle and two 45-degree turns.
pub fn validate_course(course: &Course) -> Result<()> {
    let mut angles: Vec<i64> = course.path.corners().iter().map(|c| c.angle_deg.round() as i64).collect();
    angles.sort();
    if angles != [45, 45, 90, 90, 90] {
        return Err(Error::Config(format!(
            "navigation course must have three 90 and two 45 degree turns, found {angles:?}"
        )));
    }
    Ok(())
}

/// One round trip A -> B -> A by a scripted operator.
pub fn navigation_trial(setup: &Setup, course: &Course, operator: &OperatorParams, timeout_s: f64, seed: u64) -> Result<(NavTrial, Vec<Point>)> {
    let world = World::new(setup.robot.clone(), course.start_pose(), course.obstacles.clone(), seed)?;
    let mut rig = Rig::new(world, ControlState::new(setup.button), setup.tilt, setup.feedback, setup.link_for(seed))?;
    let mut rng = rng_for(seed, &[0x0a11]);
    // Enter movement mode with a long press.
    if rig.press_for(setup.button.hold_ms + 100)? != Mode::Movement {
        return Err(Error::Session("long press did not enter movement mode".into()));
    }
    let start = rig.now_ms();
    let first_sample = rig.world.trace().len();
    let mut driver = Driver::new(course.path.clone(), *operator, &mut rng);
    let completed = driver.run(&mut rig, &mut rng, (timeout_s * 1000.0) as i64)?;
    let path: Vec<Point> = rig.world.trace()[first_sample..].iter().map(|s| s.pose.point()).collect();
    let m = rig.world.metrics();
    let trial = NavTrial {
        trial: 0,
        operator: 0,
        seed,
        completed,
        collisions: m.collisions,
        estops: m.estops,
        completion_s: (rig.now_ms() - start) as f64 / 1000.0,
        deviation_cm: trajectory_deviation(&path, &course.path)?,
        success: completed && m.collisions == 0,
    };
    Ok((trial, path))
}

pub fn run_navigation(setup: &Setup, course: &Course, params: &NavigationParams, seed: u64) -> Result<NavigationReport> {
    validate_course(course)?;
    if params.trials == 0 || params.operators == 0 {
        return Err(Error::Config("navigation needs at least one trial and one operator".into()));
    }
    setup.operator.validate()?;
    let operators: Vec<OperatorParams> = (0..params.operators)
        .map(|k| setup.operator_variant(seed, k as u64))
        .collect();
    let trials = (0..params.trials)
        .into_par_iter()
        .map(|i| {
            let op = i % params.operators;
            let s = derive_seed(seed, &[0x2a7, i as u64]);
            let (mut t, _) = navigation_trial(setup, course, &operators[op], params.timeout_s, s)?;
            t.trial = i;
            t.operator = op;
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_navigation(&trials);
    Ok(NavigationReport { trials, summary })
}

impl NavigationReport {
    pub fn table(&self) -> String {
        let s = &self.summary;
        report::table(
            "Navigation: scripted operators, A -> B -> A",
            &[
                ("trials", s.trials.to_string()),
                ("collision-free round trips", s.successes.to_string()),
                ("success rate", format!("{:.1}%", 100.0 * s.success_rate)),
                ("collisions", s.collisions.to_string()),
                ("mean completion time (s)", format!("{:.2}", s.mean_completion_s)),
                ("mean trajectory deviation (cm)", format!("{:.2}", s.mean_deviation_cm)),
            ],
            &["Reference: 98% success, 3.6 cm deviation, about 30 s per round trip."],
        )
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
        report::emit(dir, "navigation", &self.trials, &self.summary, &self.table())
    }
}
