//! TOML configuration for the CLI: every tunable constant, the scenario file
//! (course and object catalog) and per-experiment settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ModelConfig, TrainConfig};
use crate::control::{ActivityGate, ButtonParams, FeedbackParams, TiltParams};
use crate::error::{Error, Result};
use crate::harness::navigation::validate_course;
use crate::harness::transfer::validate_catalog;
use crate::harness::{NavigationParams, OperatorParams, RecognitionParams, Setup, TransferParams};
use crate::link::LinkConfig;
use crate::sim::{default_catalog, Course, LoopLayout, ObjectSpec, PathSpec, Rect, RobotParams};
use crate::synth::DatasetSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeParams {
    pub port: u16,
    pub telemetry_hz: f64,
    /// Session log, one JSON record per line.
    pub log: Option<PathBuf>,
}

impl Default for ServeParams {
    fn default() -> Self {
        ServeParams {
            port: 8765,
            telemetry_hz: 25.0,
            log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: Option<u64>,
    /// Course and catalog file; the built-in loop and catalog when absent.
    pub scenario: Option<PathBuf>,
    /// Checkpoint used by `eval` and the experiments.
    pub checkpoint: Option<PathBuf>,
    pub dataset: DatasetSpec,
    /// Architecture; the compact network sized to the dataset window when absent.
    pub model: Option<ModelConfig>,
    pub train: TrainConfig,
    pub link: LinkConfig,
    pub tilt: TiltParams,
    pub button: ButtonParams,
    pub feedback: FeedbackParams,
    pub gate: ActivityGate,
    pub robot: RobotParams,
    pub operator: OperatorParams,
    pub course: LoopLayout,
    pub recognition: RecognitionParams,
    pub navigation: NavigationParams,
    pub transfer: TransferParams,
    pub serve: ServeParams,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: AppConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(cfg.resolve_paths(base))
    }

    /// Makes relative file references relative to the config file.
    fn resolve_paths(mut self, base: &Path) -> Self {
        for p in [&mut self.scenario, &mut self.checkpoint, &mut self.serve.log].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }

    pub fn model(&self) -> ModelConfig {
        self.model.unwrap_or_else(|| ModelConfig::compact(self.dataset.window_len()))
    }

    pub fn setup(&self) -> Setup {
        Setup {
            robot: self.robot.clone(),
            link: self.link,
            tilt: self.tilt,
            button: self.button,
            feedback: self.feedback,
            gate: self.gate,
            operator: self.operator,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(p) => Scenario::load(p),
            None => Ok(Scenario {
                course: self.course.build()?,
                catalog: default_catalog(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        let model = self.model();
        model.validate()?;
        if model.window_len != self.dataset.window_len() {
            return Err(Error::Config(format!(
                "model window {} does not match the dataset window {}",
                model.window_len,
                self.dataset.window_len()
            )));
        }
        self.train.validate(model.classes)?;
        self.link.validate()?;
        self.feedback.validate()?;
        self.robot.validate()?;
        self.operator.validate()?;
        if !(self.serve.telemetry_hz >= 20.0 && self.serve.telemetry_hz <= 1000.0) {
            return Err(Error::Config(format!("telemetry rate {} Hz outside [20, 1000]", self.serve.telemetry_hz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_turnaround")]
    turnaround: usize,
    #[serde(default)]
    obstacles: Vec<[f64; 4]>,
    #[serde(default)]
    objects: Vec<ObjectSpec>,
}

fn default_turnaround() -> usize {
    3
}

/// Course geometry plus the object catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub course: Course,
    pub catalog: Vec<ObjectSpec>,
}

impl Scenario {
    /// Reads a scenario:
    ///
    /// ```toml
    /// waypoints = [[0, 0], [2, 0], [2, 1]]
    /// turnaround = 1
    /// obstacles = [[0.5, 0.4, 1.5, 0.6]]   # min_x, min_y, max_x, max_y
    /// [[objects]]
    /// name = "watch"
    /// ...
    /// ```
    ///
    /// An empty object list selects the default catalog.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text)?;
        let path = PathSpec::new(f.waypoints.iter().map(|&[x, y]| crate::sim::Point::new(x, y)).collect())?;
        let obstacles = f
            .obstacles
            .iter()
            .map(|&[a, b, c, d]| Rect::new(a, b, c, d))
            .collect::<Result<Vec<_>>>()?;
        let catalog = if f.objects.is_empty() { default_catalog() } else { f.objects };
        Scenario {
            course: Course {
                path,
                obstacles,
                turnaround: f.turnaround,
            },
            catalog,
        }
        .checked()
    }

    /// Re-runs every geometric and catalog check, e.g. after deserializing.
    pub fn checked(self) -> Result<Self> {
        let path = PathSpec::new(self.course.path.waypoints().to_vec())?;
        if self.course.turnaround == 0 || self.course.turnaround >= path.waypoints().len() {
            return Err(Error::Config(format!("turnaround waypoint {} out of range", self.course.turnaround)));
        }
        for r in &self.course.obstacles {
            Rect::new(r.min_x, r.min_y, r.max_x, r.max_y)?;
        }
        for o in &self.catalog {
            o.validate()?;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Recognition,
    Navigation,
    Transfer,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Recognition => "recognition",
            Experiment::Navigation => "navigation",
            Experiment::Transfer => "transfer",
        }
    }
}

/// One resolved experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub trials: usize,
    pub seed: u64,
    pub scenario: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, cfg: &AppConfig, seed: u64, out: PathBuf) -> Self {
        let trials = match experiment {
            Experiment::Recognition => crate::gesture::GestureClass::COUNT * cfg.recognition.subjects * cfg.recognition.repetitions,
            Experiment::Navigation => cfg.navigation.trials,
            Experiment::Transfer => 9 * cfg.transfer.trials_per_combo,
        };
        ExperimentConfig {
            experiment,
            trials,
            seed,
            scenario: cfg.scenario.clone(),
            checkpoint: cfg.checkpoint.clone(),
            out,
        }
    }

    pub fn validate(&self, cfg: &AppConfig) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config(format!("{} needs at least one trial", self.experiment.name())));
        }
        for p in [&self.scenario, &self.checkpoint].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        match self.experiment {
            Experiment::Recognition if self.checkpoint.is_none() => {
                return Err(Error::Config("recognition needs a trained checkpoint".into()))
            }
            Experiment::Navigation => validate_course(&cfg.scenario()?.course)?,
            Experiment::Transfer => validate_catalog(&cfg.scenario()?.catalog)?,
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg: AppConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, AppConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<AppConfig>("sede = 3").is_err());
        assert!(toml::from_str::<AppConfig>("[link]\ndrop = 0.1").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg: AppConfig = toml::from_str("[link]\ndrop_prob = 0.3\n[navigation]\ntrials = 4").unwrap();
        assert_eq!(cfg.link.drop_prob, 0.3);
        assert_eq!(cfg.link.latency_ms, LinkConfig::default().latency_ms);
        assert_eq!(cfg.navigation.trials, 4);
    }

    #[test]
    fn mismatched_model_window_rejected() {
        let cfg = AppConfig { model: Some(ModelConfig::compact(100)), ..AppConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn scenario_parse() {
        let s = Scenario::parse("waypoints = [[0, 0], [2, 0], [2, 1]]\nturnaround = 1\nobstacles = [[0.5, 0.4, 1.5, 0.6]]")
            .unwrap();
        assert_eq!(s.course.obstacles.len(), 1);
        assert_eq!(s.catalog, default_catalog());
        assert!(Scenario::parse("waypoints = [[0, 0]]").is_err());
        assert!(Scenario::parse("waypoints = [[0, 0], [1, 0]]\nobstacles = [[1, 1, 0, 0]]").is_err());
    }

    #[test]
    fn scenario_without_turns_fails_navigation_validation() {
        let s = Scenario::parse("waypoints = [[0, 0], [2, 0], [4, 0]]\nturnaround = 1").unwrap();
        assert!(matches!(validate_course(&s.course), Err(Error::Config(_))));
    }
}
