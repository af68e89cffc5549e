//! Scenario configuration, loaded from JSON.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::profile::ProfileSpec;
use super::sensors::SensorModels;
use super::wall::WallTask;
use crate::baseline::BaselineConfig;
use crate::controller::{Gains, IntegralClamp};
use crate::error::{Error, Result};
use crate::platform::PlatformParams;
use crate::selector::SelectorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorKind {
    Proposed,
    Baseline,
}

impl AllocatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "baseline" => Ok(Self::Baseline),
            other => Err(Error::Config(format!("unknown allocator '{other}'"))),
        }
    }
}

/// Cant angle used to build the allocation matrix of the proposed scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationAlpha {
    /// The angle just returned by the selector.
    Commanded,
    /// The angle the servos have actually reached.
    Actual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Take off and hold the hover position.
    Hover,
    /// Hover while an interaction force profile acts on the CoM (world frame).
    ForceProfile(ProfileSpec),
    /// Scripted wall contacts.
    Wall(WallTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub platform: PlatformParams,
    pub gains: Gains,
    pub integral_clamp: IntegralClamp,
    pub selector: SelectorConfig,
    pub baseline: BaselineConfig,
    pub sensors: SensorModels,
    pub task: Task,
    pub allocator: AllocatorKind,
    pub allocation_alpha: AllocationAlpha,
    pub seed: u64,
    /// s
    pub duration: f64,
    /// Hz
    pub physics_rate: f64,
    /// Hz
    pub control_rate: f64,
    /// LUT grid step when no LUT is supplied [deg].
    pub lut_step_deg: f64,
    pub start_position: Vector3<f64>,
    pub hover_position: Vector3<f64>,
    /// Minimum-jerk takeoff time; zero gives a step reference [s].
    pub takeoff_time: f64,
    /// KPIs use control steps with t ≥ kpi_start [s].
    pub kpi_start: f64,
    /// Abort when the true ‖e_p‖ exceeds this [m].
    pub abort_error: Option<f64>,
    /// Abort once this many infeasible selections have occurred.
    pub max_infeasible: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            platform: PlatformParams::default(),
            gains: Gains::default(),
            integral_clamp: IntegralClamp::default(),
            selector: SelectorConfig::default(),
            baseline: BaselineConfig::default(),
            sensors: SensorModels::default(),
            task: Task::ForceProfile(ProfileSpec::reference()),
            allocator: AllocatorKind::Proposed,
            allocation_alpha: AllocationAlpha::Actual,
            seed: 0,
            duration: 90.0,
            physics_rate: 1000.0,
            control_rate: 100.0,
            lut_step_deg: 1.0,
            start_position: Vector3::zeros(),
            hover_position: Vector3::new(0.0, 0.0, 1.0),
            takeoff_time: 5.0,
            kpi_start: 0.0,
            abort_error: None,
            max_infeasible: None,
        }
    }
}

impl ScenarioConfig {
    /// Noise-free takeoff to hover with a step reference.
    pub fn hover() -> Self {
        Self {
            task: Task::Hover,
            sensors: SensorModels::ideal(),
            duration: 25.0,
            takeoff_time: 0.0,
            kpi_start: 0.0,
            ..Self::default()
        }
    }

    /// Wall-contact task with the contact vehicle and its gains.
    pub fn wall() -> Self {
        let task = WallTask::default();
        Self {
            platform: PlatformParams::contact_vehicle(),
            gains: Gains::contact_task(),
            duration: task.max_duration(),
            start_position: Vector3::zeros(),
            kpi_start: 0.0,
            abort_error: Some(1.0),
            task: Task::Wall(task),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn physics_dt(&self) -> f64 {
        1.0 / self.physics_rate
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    /// Physics steps per control step.
    pub fn decimation(&self) -> usize {
        (self.physics_rate / self.control_rate).round() as usize
    }

    pub fn physics_steps(&self) -> usize {
        (self.duration * self.physics_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.platform.validate()?;
        self.gains.validate()?;
        self.selector.validate()?;
        self.baseline.validate()?;
        self.sensors.validate()?;
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(
                "duration must be finite and nonnegative".into(),
            ));
        }
        if !(self.physics_rate > 0.0
            && self.control_rate > 0.0
            && self.control_rate <= self.physics_rate)
        {
            return Err(Error::Config(
                "rates must be positive with control_rate <= physics_rate".into(),
            ));
        }
        let ratio = self.physics_rate / self.control_rate;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(
                "physics_rate must be a multiple of control_rate".into(),
            ));
        }
        if !(self.lut_step_deg > 0.0 && self.lut_step_deg <= 10.0) {
            return Err(Error::Config("lut_step_deg must lie in (0, 10]".into()));
        }
        if !(self.takeoff_time >= 0.0 && self.kpi_start >= 0.0) {
            return Err(Error::Config(
                "takeoff_time and kpi_start must be nonnegative".into(),
            ));
        }
        if let Some(a) = self.abort_error {
            if !(a > 0.0) {
                return Err(Error::Config("abort_error must be positive".into()));
            }
        }
        if !(self.integral_clamp.position >= 0.0 && self.integral_clamp.attitude >= 0.0) {
            return Err(Error::Config("integral clamps must be nonnegative".into()));
        }
        match &self.task {
            Task::Hover => {}
            Task::ForceProfile(p) => {
                p.build()?;
            }
            Task::Wall(w) => w.validate()?,
        }
        Ok(())
    }
}
