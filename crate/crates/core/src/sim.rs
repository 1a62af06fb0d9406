//! Closed-loop episodes: sense, fuse, rebuild the safe set on a fixed period,
//! filter the planner's control and integrate the vehicle under disturbance.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brs::{full_recompute, rebuild, SafeSetSnapshot, UpdateMethod};
use crate::dynamics::VehicleModel;
use crate::env::{implicit_obstacle, sense, Environment, KnownFreeMap, SensorSpec};
use crate::error::{Error, Result};
use crate::grid::{NodeMask, ScalarField, StateGrid};
use crate::hji::{SolveReport, SolverConfig};
use crate::plan::{PlannerConfig, PlannerState};
use crate::safety::{DecisionRecord, Mode, SafetyFilter};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceMode {
    #[default]
    None,
    /// Uniform on the disturbance box, resampled every control step.
    Random,
    /// Minimizes the value rate at the current state under the active snapshot.
    Adversarial,
}

impl DisturbanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DisturbanceMode::None => "none",
            DisturbanceMode::Random => "random",
            DisturbanceMode::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for DisturbanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DisturbanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DisturbanceMode::None),
            "random" => Ok(DisturbanceMode::Random),
            "adversarial" => Ok(DisturbanceMode::Adversarial),
            other => Err(Error::InvalidConfig(format!(
                "unknown disturbance mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub start: Vec<f64>,
    /// Radius of the obstacle-free disk around the start known before moving.
    pub init_radius: f64,
    pub control_dt: f64,
    /// Period between safe-set rebuilds.
    pub safety_horizon: f64,
    pub max_time: f64,
    pub disturbance: DisturbanceMode,
    pub seed: u64,
    /// Integration substep; also the spacing of collision checks.
    pub substep: f64,
    /// Safety-mode release margin as a fraction of epsilon; off when unset.
    pub hysteresis: Option<f64>,
    /// Filter activation level; 1.5 position cell diagonals when unset.
    pub epsilon: Option<f64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            start: vec![2.0, 2.5, std::f64::consts::FRAC_PI_2],
            init_radius: 1.5,
            control_dt: 0.05,
            safety_horizon: 1.0,
            max_time: 60.0,
            disturbance: DisturbanceMode::None,
            seed: 1,
            substep: 0.01,
            hysteresis: None,
            epsilon: None,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("control_dt", self.control_dt),
            ("safety_horizon", self.safety_horizon),
            ("max_time", self.max_time),
            ("substep", self.substep),
            ("init_radius", self.init_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if self.control_dt > self.safety_horizon {
            return Err(Error::InvalidConfig(format!(
                "control_dt {} exceeds the safety horizon {}",
                self.control_dt, self.safety_horizon
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "epsilon {eps} must be non-negative"
                )));
            }
        }
        if let Some(h) = self.hysteresis {
            if !(h >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "hysteresis {h} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedGoal,
    Collided,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::ReachedGoal => "reached_goal",
            Outcome::Collided => "collided",
            Outcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    pub mode: Mode,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    pub outcome: Outcome,
    /// Smallest true clearance seen on any integration substep.
    pub min_obstacle_distance: f64,
}

impl Trajectory {
    pub fn safety_steps(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.mode == Mode::Safety)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebuildRecord {
    pub t: f64,
    pub method: UpdateMethod,
    /// Position nodes first seen free since the previous rebuild.
    pub newly_free: usize,
    /// Nothing new was sensed, so the previous snapshot was kept.
    pub skipped: bool,
    pub report: SolveReport,
}

/// Inputs and result of one rebuild, handed to observers.
pub struct RebuildEvent<'a> {
    pub t: f64,
    pub l: &'a ScalarField,
    /// Newly free nodes over the full state grid.
    pub newly_free: &'a NodeMask,
    pub previous: &'a SafeSetSnapshot,
    pub snapshot: &'a SafeSetSnapshot,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub decisions: Vec<DecisionRecord>,
    pub initial: SafeSetSnapshot,
    pub rebuilds: Vec<RebuildRecord>,
    pub snapshot: SafeSetSnapshot,
    pub map: KnownFreeMap,
}

/// Everything an episode needs besides the method and episode settings.
#[derive(Debug, Clone)]
pub struct EpisodeSetup<'a> {
    pub env: &'a Environment,
    pub model: &'a VehicleModel,
    pub sensor: &'a SensorSpec,
    pub planner: &'a PlannerConfig,
    pub grid: &'a Arc<StateGrid>,
    pub solver: &'a SolverConfig,
}

fn wrap_angle(phi: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = phi - TAU * ((phi + PI) / TAU).floor();
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

fn rk4_step(model: &VehicleModel, x: &[f64], u: &[f64], d: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let shifted =
        |k: &[f64], scale: f64| -> Vec<f64> { (0..n).map(|i| x[i] + scale * h * k[i]).collect() };
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    model.flow_into(x, u, d, &mut k1);
    model.flow_into(&shifted(&k1, 0.5), u, d, &mut k2);
    model.flow_into(&shifted(&k2, 0.5), u, d, &mut k3);
    model.flow_into(&shifted(&k3, 1.0), u, d, &mut k4);
    let mut out: Vec<f64> = (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if let Some(axis) = model.heading_axis() {
        out[axis] = wrap_angle(out[axis]);
    }
    out
}

/// States after each classical Runge-Kutta substep of at most `substep`
/// covering `dt`, ending with the state at `dt`. Heading stays in `[-pi, pi)`.
pub fn integrate_substeps(
    model: &VehicleModel,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    dt: f64,
    substep: f64,
) -> Vec<Vec<f64>> {
    let steps = (dt / substep).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut out = Vec::with_capacity(steps);
    let mut cur = x.to_vec();
    for _ in 0..steps {
        cur = rk4_step(model, &cur, u, d, h);
        out.push(cur.clone());
    }
    out
}

/// State after holding `u` and `d` for `dt`.
pub fn integrate(
    model: &VehicleModel,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    dt: f64,
    substep: f64,
) -> Vec<f64> {
    integrate_substeps(model, x, u, d, dt, substep)
        .pop()
        .unwrap_or_else(|| x.to_vec())
}

/// Known-free map at the start: the initial disk plus what the sensor sees
/// from the start state.
pub fn initial_map(setup: &EpisodeSetup<'_>, cfg: &EpisodeConfig) -> Result<KnownFreeMap> {
    let start = &cfg.start;
    if start.len() != setup.model.state_dim() {
        return Err(Error::Scenario(format!(
            "start state has {} entries for a {}-state model",
            start.len(),
            setup.model.state_dim()
        )));
    }
    let p = [start[0], start[1]];
    if setup.env.in_collision(p) {
        return Err(Error::Scenario(format!(
            "start position {p:?} is in collision or outside the workspace"
        )));
    }
    let clearance = setup.env.clearance(p);
    if clearance < cfg.init_radius {
        return Err(Error::Scenario(format!(
            "initial free disk of radius {} around {p:?} is not obstacle free (clearance {clearance:.3})",
            cfg.init_radius
        )));
    }
    let pos = setup.grid.position_grid();
    let mut map = KnownFreeMap::from_disk(pos.clone(), p, cfg.init_radius);
    let scan = sense(setup.env, setup.sensor, start, &pos);
    map.fuse(&scan.free)?;
    map.record_hits(&scan.hits);
    Ok(map)
}

pub fn run_episode(
    setup: &EpisodeSetup<'_>,
    method: UpdateMethod,
    cfg: &EpisodeConfig,
) -> Result<Episode> {
    run_episode_observed(setup, method, cfg, &mut |_| Ok(()))
}

/// [`run_episode`] calling `observer` after every rebuild that was not
/// skipped.
pub fn run_episode_observed(
    setup: &EpisodeSetup<'_>,
    method: UpdateMethod,
    cfg: &EpisodeConfig,
    observer: &mut dyn FnMut(&RebuildEvent<'_>) -> Result<()>,
) -> Result<Episode> {
    cfg.validate()?;
    setup.env.validate()?;
    setup.sensor.validate()?;
    let EpisodeSetup {
        env,
        model,
        sensor,
        planner,
        grid,
        solver,
    } = *setup;
    if grid.ndim() != model.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}-axis grid for a {}-state model",
            grid.ndim(),
            model.state_dim()
        )));
    }
    if !grid.contains(&cfg.start) {
        return Err(Error::Scenario(format!(
            "start state {:?} lies outside the grid",
            cfg.start
        )));
    }
    let epsilon = cfg
        .epsilon
        .unwrap_or_else(|| crate::brs::default_epsilon(grid));

    let mut map = initial_map(setup, cfg)?;
    let l0 = implicit_obstacle(&map, grid)?;
    let initial = full_recompute(&l0, model, solver)?
        .with_epsilon(epsilon)
        .with_time(0.0);
    if !initial.is_safe(&cfg.start)? {
        return Err(Error::Scenario(format!(
            "start state {:?} is outside the initial safe set (value {:.4} <= epsilon {:.4})",
            cfg.start,
            initial.value_at(&cfg.start)?,
            epsilon
        )));
    }
    let mut snapshot = initial.clone();
    let mut planner_state = PlannerState::new(planner.clone());
    let mut filter = SafetyFilter::new(cfg.hysteresis);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dist_bounds = model.disturbance_bounds();
    let pos_grid = grid.position_grid();
    let mut pending = NodeMask::empty(pos_grid.len());

    let mut x = cfg.start.clone();
    let mut samples = Vec::new();
    let mut decisions = Vec::new();
    let mut rebuilds = Vec::new();
    let mut min_clearance = env.clearance([x[0], x[1]]);
    let mut last_rebuild = 0.0;
    let mut step = 0usize;
    let outcome = loop {
        let t = step as f64 * cfg.control_dt;
        if (x[0] - env.goal.position[0]).hypot(x[1] - env.goal.position[1]) <= env.goal.radius {
            break Outcome::ReachedGoal;
        }
        if t >= cfg.max_time - 1e-9 {
            break Outcome::Timeout;
        }

        let scan = sense(env, sensor, &x, &pos_grid);
        let fresh = map.fuse(&scan.free)?;
        map.record_hits(&scan.hits);
        pending.union_with(&fresh);

        if step > 0 && t - last_rebuild >= cfg.safety_horizon - 1e-9 {
            last_rebuild = t;
            let count = pending.count();
            if count == 0 {
                rebuilds.push(RebuildRecord {
                    t,
                    method,
                    newly_free: 0,
                    skipped: true,
                    report: SolveReport::default(),
                });
            } else {
                let l = implicit_obstacle(&map, grid)?;
                let newly_free = pending.extrude(grid);
                let next = rebuild(method, &snapshot.value, &l, &newly_free, model, solver)?
                    .with_epsilon(epsilon)
                    .with_time(t);
                observer(&RebuildEvent {
                    t,
                    l: &l,
                    newly_free: &newly_free,
                    previous: &snapshot,
                    snapshot: &next,
                })?;
                log::debug!(
                    "rebuild at t={t:.2} by {method}: {count} new position nodes, {} iterations in {:.3}s",
                    next.report.iterations,
                    next.report.elapsed_seconds
                );
                rebuilds.push(RebuildRecord {
                    t,
                    method,
                    newly_free: count,
                    skipped: false,
                    report: next.report.clone(),
                });
                snapshot = next;
                pending = NodeMask::empty(pos_grid.len());
            }
        }

        let plan = planner_state.plan_control(t, &x, &env.goal, &map, &env.workspace, model);
        let decision = filter.apply(&snapshot, model, &x, &plan.control)?;
        let u = decision.control.clone();
        let d = match cfg.disturbance {
            DisturbanceMode::None => model.no_disturbance(),
            DisturbanceMode::Random => dist_bounds
                .iter()
                .map(|b| rng.gen_range(b.lo..=b.hi))
                .collect(),
            DisturbanceMode::Adversarial => {
                if grid.contains(&x) {
                    let grad = snapshot.value.gradient_at(&x)?;
                    model.optimal_disturbance(&x, &grad)
                } else {
                    model.no_disturbance()
                }
            }
        };
        samples.push(Sample {
            t,
            state: x.clone(),
            control: u.clone(),
            mode: decision.mode,
            value: decision.value_at_state,
        });
        decisions.push(DecisionRecord {
            t,
            state: x.clone(),
            planner_control: plan.control,
            decision,
        });

        let mut prev = [x[0], x[1]];
        let mut hit = false;
        for s in integrate_substeps(model, &x, &u, &d, cfg.control_dt, cfg.substep) {
            let p = [s[0], s[1]];
            min_clearance = min_clearance.min(env.clearance(p));
            if env.segment_collides(prev, p) {
                min_clearance = min_clearance.min(0.0);
                hit = true;
            }
            prev = p;
            x = s;
            if hit {
                break;
            }
        }
        step += 1;
        if hit || min_clearance <= 0.0 {
            break Outcome::Collided;
        }
    };
    let final_time = step as f64 * cfg.control_dt;
    if outcome == Outcome::Collided {
        log::warn!("collision at t={final_time:.2}, state {x:?}");
    }
    Ok(Episode {
        trajectory: Trajectory {
            samples,
            final_state: x,
            final_time,
            outcome,
            min_obstacle_distance: min_clearance,
        },
        decisions,
        initial,
        rebuilds,
        snapshot,
        map,
    })
}

/// Trajectory as CSV: one row per control step, then an outcome line
/// starting with `#`.
pub fn write_trajectory_csv(
    mut w: impl Write,
    model: &VehicleModel,
    traj: &Trajectory,
) -> Result<()> {
    {
        let mut out = csv::Writer::from_writer(&mut w);
        let mut header = vec!["t".to_string()];
        header.extend(model.state_labels().iter().map(|s| s.to_string()));
        header.extend(model.control_labels().iter().map(|s| format!("u_{s}")));
        header.push("mode".into());
        header.push("V".into());
        out.write_record(&header)?;
        for s in &traj.samples {
            let mut row = vec![s.t.to_string()];
            row.extend(s.state.iter().map(|v| v.to_string()));
            row.extend(s.control.iter().map(|v| v.to_string()));
            row.push(s.mode.to_string());
            row.push(s.value.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
    }
    writeln!(
        w,
        "# outcome={} min_obstacle_distance={:.6} final_time={:.3} steps={} safety_steps={}",
        traj.outcome,
        traj.min_obstacle_distance,
        traj.final_time,
        traj.samples.len(),
        traj.safety_steps()
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_flow_is_exact() {
        let m = VehicleModel::dubins3_default();
        let x = integrate(&m, &[0.0, 0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], 1.0, 0.01);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn full_circle_returns_home() {
        let m = VehicleModel::dubins3_default();
        let x = integrate(
            &m,
            &[0.0, 0.0, 0.0],
            &[1.0, 1.0],
            &[0.0, 0.0],
            2.0 * PI,
            0.01,
        );
        assert!(x[0].abs() <= 1e-6 && x[1].abs() <= 1e-6, "{x:?}");
        assert!(x[2].abs() < 1e-9 || (x[2] + PI).abs() < 1e-9 || x[2].abs() < 1e-6);
    }

    #[test]
    fn heading_wraps() {
        let m = VehicleModel::dubins3_default();
        let x = integrate(
            &m,
            &[0.0, 0.0, PI - 0.01],
            &[0.1, 1.0],
            &[0.0, 0.0],
            0.1,
            0.01,
        );
        assert!((x[2] - (-PI + 0.09)).abs() < 1e-9, "{}", x[2]);
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
    }

    #[test]
    fn disturbance_modes_parse() {
        for m in [
            DisturbanceMode::None,
            DisturbanceMode::Random,
            DisturbanceMode::Adversarial,
        ] {
            assert_eq!(m.as_str().parse::<DisturbanceMode>().unwrap(), m);
        }
        assert!("gusty".parse::<DisturbanceMode>().is_err());
    }

    #[test]
    fn config_checks() {
        let mut cfg = EpisodeConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.control_dt = 2.0;
        assert!(cfg.validate().is_err());
    }
}
