//! Scenario files: one TOML document holding every parameter of a run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::brs::UpdateMethod;
use crate::dynamics::VehicleModel;
use crate::env::{Environment, SensorSpec};
use crate::error::{Error, Result};
use crate::grid::StateGrid;
use crate::hji::SolverConfig;
use crate::plan::PlannerConfig;
use crate::sim::{EpisodeConfig, EpisodeSetup};

/// Node counts per state axis. Position axes span the workspace, the heading
/// axis `[-pi, pi)`, and a speed axis the model's speed extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self, env: &Environment, model: &VehicleModel) -> Result<Arc<StateGrid>> {
        let ws = &env.workspace;
        let (lower, upper, periodic): (Vec<f64>, Vec<f64>, Vec<bool>) = match model {
            VehicleModel::Dubins3 { .. } => (
                vec![ws.min[0], ws.min[1], -PI],
                vec![ws.max[0], ws.max[1], PI],
                vec![false, false, true],
            ),
            VehicleModel::Dubins4 { speed_extent, .. } => (
                vec![ws.min[0], ws.min[1], -PI, speed_extent.lo],
                vec![ws.max[0], ws.max[1], PI, speed_extent.hi],
                vec![false, false, true, false],
            ),
            VehicleModel::Integrator1D { .. } => {
                return Err(Error::Scenario(
                    "scenarios need a planar vehicle model".into(),
                ));
            }
        };
        if self.counts.len() != lower.len() {
            return Err(Error::Scenario(format!(
                "grid.counts has {} entries for a {}-state model",
                self.counts.len(),
                lower.len()
            )));
        }
        let grid = StateGrid::new(&lower, &upper, &self.counts, &periodic)?
            .with_position_dims(2)?
            .with_labels(model.state_labels())?;
        Ok(Arc::new(grid))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Update method used by `run` when none is given.
    #[serde(default = "default_method")]
    pub method: UpdateMethod,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub environment: Environment,
    pub model: VehicleModel,
    pub sensor: SensorSpec,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
}

fn default_method() -> UpdateMethod {
    UpdateMethod::Local
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Bundled scenario files, by name.
pub const BUNDLED: [(&str, &str); 3] = [
    (
        "running-example",
        include_str!("../scenarios/running-example.toml"),
    ),
    (
        "narrow-corridor",
        include_str!("../scenarios/narrow-corridor.toml"),
    ),
    ("empty-world", include_str!("../scenarios/empty-world.toml")),
];

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no bundled scenario named '{name}'")))?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Short hex digest of the serialized configuration.
    pub fn config_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }

    pub fn grid(&self) -> Result<Arc<StateGrid>> {
        self.grid.build(&self.environment, &self.model)
    }

    /// Cross-checks every section against the others.
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.model.validate()?;
        self.sensor.validate()?;
        self.solver.validate()?;
        self.episode.validate()?;
        let grid = self.grid()?;
        let start = &self.episode.start;
        if start.len() != self.model.state_dim() {
            return Err(Error::Scenario(format!(
                "episode.start has {} entries for a {}-state model",
                start.len(),
                self.model.state_dim()
            )));
        }
        let p = [start[0], start[1]];
        if !self.environment.workspace.contains(p) {
            return Err(Error::Scenario(format!(
                "start position {p:?} lies outside the workspace"
            )));
        }
        if self.environment.in_collision(p) {
            return Err(Error::Scenario(format!(
                "start position {p:?} lies inside an obstacle"
            )));
        }
        if !grid.contains(start) {
            return Err(Error::Scenario(format!(
                "start state {start:?} lies outside the grid"
            )));
        }
        let clearance = self.environment.clearance(p);
        if clearance < self.episode.init_radius {
            return Err(Error::Scenario(format!(
                "initial free disk of radius {} is not obstacle free (clearance {clearance:.3})",
                self.episode.init_radius
            )));
        }
        if !(self.planner.step_length > 0.0
            && self.planner.replan_period > 0.0
            && self.planner.lookahead > 0.0)
        {
            return Err(Error::Scenario(
                "planner step_length, replan_period and lookahead must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Borrowed view for [`crate::sim::run_episode`].
    pub fn setup<'a>(&'a self, grid: &'a Arc<StateGrid>) -> EpisodeSetup<'a> {
        EpisodeSetup {
            env: &self.environment,
            model: &self.model,
            sensor: &self.sensor,
            planner: &self.planner,
            grid,
            solver: &self.solver,
        }
    }
}
