//! Goal-seeking planners. All of them treat unknown space as free; only the
//! obstacle points actually struck by sensor rays are avoided.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleModel;
use crate::env::{angle_diff, KnownFreeMap, Point, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Rrt,
    Spline,
    Optimistic,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Rrt => "rrt",
            PlannerKind::Spline => "spline",
            PlannerKind::Optimistic => "optimistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    /// Simulation seconds between replans.
    pub replan_period: f64,
    pub seed: u64,
    /// RRT extension length and largest waypoint spacing (m).
    pub step_length: f64,
    pub max_samples: usize,
    pub goal_bias: f64,
    /// Inflation radius around observed obstacle points (m).
    pub clearance: f64,
    /// Distance ahead along the path used as tracking target (m).
    pub lookahead: f64,
    /// Proportional gain from bearing error to turn rate.
    pub heading_gain: f64,
    /// Desired forward speed; the model's top speed when unset.
    pub cruise_speed: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::Spline,
            replan_period: 1.0,
            seed: 7,
            step_length: 0.5,
            max_samples: 4000,
            goal_bias: 0.1,
            clearance: 0.3,
            lookahead: 0.6,
            heading_gain: 2.0,
            cruise_speed: None,
        }
    }
}

/// Control chosen by the planner for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub control: Vec<f64>,
    pub replanned: bool,
    /// No usable path; the straight-to-goal controller was used instead.
    pub fallback: bool,
}

/// Planner with its current path, replan clock and random stream.
#[derive(Debug, Clone)]
pub struct PlannerState {
    cfg: PlannerConfig,
    path: Vec<Point>,
    rng: ChaCha8Rng,
    last_plan: Option<f64>,
    failed: bool,
}

impl PlannerState {
    pub fn new(cfg: PlannerConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self {
            cfg,
            path: Vec::new(),
            rng,
            last_plan: None,
            failed: false,
        }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// Current waypoints; empty for the optimistic planner.
    pub fn path(&self) -> &[Point] {
        &self.path
    }

    pub fn plan_control(
        &mut self,
        t: f64,
        x: &[f64],
        goal: &crate::env::Goal,
        map: &KnownFreeMap,
        workspace: &Rect,
        model: &VehicleModel,
    ) -> PlanOutput {
        let p = [x[0], x[1]];
        if self.cfg.kind == PlannerKind::Optimistic {
            return PlanOutput {
                control: steer_to(model, x, goal.position, &self.cfg),
                replanned: false,
                fallback: false,
            };
        }
        let known = KnownObstacles::new(map, self.cfg.clearance, workspace);
        let due = self
            .last_plan
            .is_none_or(|t0| t - t0 >= self.cfg.replan_period - 1e-9);
        let blocked = !self.path.is_empty() && !known.path_free(&self.path);
        let mut replanned = false;
        if due || self.path.is_empty() && !self.failed || blocked {
            self.replan(t, x, goal, &known, workspace);
            replanned = true;
        }
        if self.path.len() < 2 {
            return PlanOutput {
                control: steer_to(model, x, goal.position, &self.cfg),
                replanned,
                fallback: true,
            };
        }
        self.trim(p);
        let control = match self.cfg.kind {
            PlannerKind::Spline => self.track_linearized(model, x),
            _ => {
                let target = point_ahead(&self.path, p, self.cfg.lookahead);
                steer_to(model, x, target, &self.cfg)
            }
        };
        PlanOutput {
            control,
            replanned,
            fallback: false,
        }
    }

    fn replan(
        &mut self,
        t: f64,
        x: &[f64],
        goal: &crate::env::Goal,
        known: &KnownObstacles,
        ws: &Rect,
    ) {
        self.last_plan = Some(t);
        let p = [x[0], x[1]];
        let path = match self.cfg.kind {
            PlannerKind::Rrt => rrt(&mut self.rng, &self.cfg, p, goal.position, known, ws),
            PlannerKind::Spline => spline_path(&self.cfg, p, x[2], goal, known),
            PlannerKind::Optimistic => None,
        };
        self.failed = path.is_none();
        if self.failed {
            log::debug!(
                "{} planner found no path from {p:?}; falling back",
                self.cfg.kind.as_str()
            );
        }
        self.path = path.unwrap_or_default();
    }

    /// Drops waypoints already passed and starts the path at `p`.
    fn trim(&mut self, p: Point) {
        let (seg, _) = closest_on_path(&self.path, p);
        if seg > 0 {
            self.path.drain(..seg);
        }
        self.path[0] = p;
    }

    /// Point-offset feedback linearization of the unicycle toward a reference
    /// moving along the path at cruise speed.
    fn track_linearized(&self, model: &VehicleModel, x: &[f64]) -> Vec<f64> {
        const OFFSET: f64 = 0.2;
        const GAIN: f64 = 1.5;
        let p = [x[0], x[1]];
        let (s, c) = x[2].sin_cos();
        let v_ref = cruise_speed(model, &self.cfg);
        let target = point_ahead(&self.path, p, self.cfg.lookahead);
        let tangent = direction_at(&self.path, target);
        let z = [p[0] + OFFSET * c, p[1] + OFFSET * s];
        let zd = [
            v_ref * tangent[0] + GAIN * (target[0] - z[0]),
            v_ref * tangent[1] + GAIN * (target[1] - z[1]),
        ];
        let v = zd[0] * c + zd[1] * s;
        let w = (-zd[0] * s + zd[1] * c) / OFFSET;
        to_model_control(model, x, v, w)
    }
}

/// Proportional heading law toward `target`; full speed when aligned.
pub fn steer_to(model: &VehicleModel, x: &[f64], target: Point, cfg: &PlannerConfig) -> Vec<f64> {
    if x.len() < 3 {
        // one-dimensional models: push straight at the target
        let mut u = model.optimal_control(x, &[target[0] - x[0]]);
        model.clamp_control(&mut u);
        return u;
    }
    let bearing = (target[1] - x[1]).atan2(target[0] - x[0]);
    let err = angle_diff(bearing, x[2]);
    let v = cruise_speed(model, cfg) * err.cos().max(0.0);
    to_model_control(model, x, v, cfg.heading_gain * err)
}

fn cruise_speed(model: &VehicleModel, cfg: &PlannerConfig) -> f64 {
    cfg.cruise_speed.unwrap_or(match model {
        VehicleModel::Dubins3 { speed, .. } => speed.hi,
        VehicleModel::Dubins4 { speed_extent, .. } => speed_extent.hi,
        VehicleModel::Integrator1D { control_max, .. } => *control_max,
    })
}

/// Maps a desired speed and turn rate into the model's control channels.
fn to_model_control(model: &VehicleModel, x: &[f64], v: f64, w: f64) -> Vec<f64> {
    let mut u = match model {
        VehicleModel::Dubins3 { .. } => vec![v, w],
        VehicleModel::Dubins4 { .. } => vec![v - x[3], w],
        VehicleModel::Integrator1D { .. } => vec![v],
    };
    model.clamp_control(&mut u);
    u
}

/// Observed obstacle points inflated by the clearance radius, on the map grid.
struct KnownObstacles {
    lower: Point,
    spacing: Point,
    counts: [usize; 2],
    blocked: Vec<bool>,
    inner: Rect,
}

impl KnownObstacles {
    fn new(map: &KnownFreeMap, clearance: f64, ws: &Rect) -> Self {
        let g = map.grid();
        let counts = [g.counts()[0], g.counts()[1]];
        let spacing = [g.spacing()[0], g.spacing()[1]];
        let mut blocked = vec![false; counts[0] * counts[1]];
        let rx = (clearance / spacing[0]).ceil() as isize;
        let ry = (clearance / spacing[1]).ceil() as isize;
        for i in map.observed_occupied().iter() {
            let (ix, iy) = ((i / counts[1]) as isize, (i % counts[1]) as isize);
            for dx in -rx..=rx {
                for dy in -ry..=ry {
                    let (jx, jy) = (ix + dx, iy + dy);
                    if jx < 0 || jy < 0 || jx >= counts[0] as isize || jy >= counts[1] as isize {
                        continue;
                    }
                    if (dx as f64 * spacing[0]).hypot(dy as f64 * spacing[1]) <= clearance {
                        blocked[jx as usize * counts[1] + jy as usize] = true;
                    }
                }
            }
        }
        let margin = 0.5 * clearance;
        let inner = Rect::new(
            [ws.min[0] + margin, ws.min[1] + margin],
            [ws.max[0] - margin, ws.max[1] - margin],
        );
        Self {
            lower: [g.lower()[0], g.lower()[1]],
            spacing,
            counts,
            blocked,
            inner,
        }
    }

    fn is_blocked(&self, p: Point) -> bool {
        let ix = ((p[0] - self.lower[0]) / self.spacing[0]).round();
        let iy = ((p[1] - self.lower[1]) / self.spacing[1]).round();
        if ix < 0.0 || iy < 0.0 || ix >= self.counts[0] as f64 || iy >= self.counts[1] as f64 {
            return true;
        }
        self.blocked[ix as usize * self.counts[1] + iy as usize]
    }

    /// Samples the segment; the part already inside a blocked zone at its
    /// start is ignored so the vehicle can always back out.
    fn segment_free(&self, a: Point, b: Point) -> bool {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let step = 0.25 * self.spacing[0].min(self.spacing[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        let mut leaving = true;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let bad = self.is_blocked(q) || !self.inner.contains(q);
            if bad && !leaving {
                return false;
            }
            leaving &= bad;
        }
        true
    }

    fn path_free(&self, path: &[Point]) -> bool {
        path.windows(2).all(|w| self.segment_free(w[0], w[1]))
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn rrt(
    rng: &mut ChaCha8Rng,
    cfg: &PlannerConfig,
    start: Point,
    goal: Point,
    known: &KnownObstacles,
    ws: &Rect,
) -> Option<Vec<Point>> {
    let step = cfg.step_length;
    let mut nodes: Vec<(Point, usize)> = vec![(start, 0)];
    let mut reached = None;
    if dist(start, goal) <= step && known.segment_free(start, goal) {
        reached = Some(0);
    }
    for _ in 0..cfg.max_samples {
        if reached.is_some() {
            break;
        }
        let sample = if rng.gen::<f64>() < cfg.goal_bias {
            goal
        } else {
            [
                rng.gen_range(ws.min[0]..ws.max[0]),
                rng.gen_range(ws.min[1]..ws.max[1]),
            ]
        };
        let (near, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, dist(n.0, sample)))
            .fold(
                (0, f64::INFINITY),
                |best, c| if c.1 < best.1 { c } else { best },
            );
        let from = nodes[near].0;
        let d = dist(from, sample);
        if d < 1e-9 {
            continue;
        }
        let scale = (step / d).min(1.0);
        let new = [
            from[0] + scale * (sample[0] - from[0]),
            from[1] + scale * (sample[1] - from[1]),
        ];
        if !known.segment_free(from, new) {
            continue;
        }
        nodes.push((new, near));
        if dist(new, goal) <= step && known.segment_free(new, goal) {
            reached = Some(nodes.len() - 1);
        }
    }
    let mut i = reached?;
    let mut path = vec![goal];
    loop {
        path.push(nodes[i].0);
        if i == 0 {
            break;
        }
        i = nodes[i].1;
    }
    path.reverse();
    Some(densify(&shortcut(&path, known), step))
}

/// Greedy visibility shortcutting.
fn shortcut(path: &[Point], known: &KnownObstacles) -> Vec<Point> {
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !known.segment_free(path[i], path[j]) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

/// Splits segments so consecutive waypoints are at most `step` apart.
fn densify(path: &[Point], step: f64) -> Vec<Point> {
    let mut out = vec![path[0]];
    for w in path.windows(2) {
        let n = (dist(w[0], w[1]) / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push([
                w[0][0] + t * (w[1][0] - w[0][0]),
                w[0][1] + t * (w[1][1] - w[0][1]),
            ]);
        }
    }
    out
}

/// Piecewise cubic Hermite curve through `knots`, parameterized per segment
/// by chord length, sampled densely.
fn hermite(knots: &[Point], start_dir: Point, end_dir: Option<Point>) -> Vec<Point> {
    let n = knots.len();
    let unit = |v: Point| {
        let l = v[0].hypot(v[1]);
        if l > 0.0 {
            [v[0] / l, v[1] / l]
        } else {
            [0.0, 0.0]
        }
    };
    let mut tangents = Vec::with_capacity(n);
    for i in 0..n {
        let t = if i == 0 {
            start_dir
        } else if i == n - 1 {
            end_dir.unwrap_or_else(|| {
                unit([knots[i][0] - knots[i - 1][0], knots[i][1] - knots[i - 1][1]])
            })
        } else {
            unit([
                knots[i + 1][0] - knots[i - 1][0],
                knots[i + 1][1] - knots[i - 1][1],
            ])
        };
        tangents.push(t);
    }
    let mut out = vec![knots[0]];
    for i in 0..n - 1 {
        let (a, b) = (knots[i], knots[i + 1]);
        let len = dist(a, b);
        let (ta, tb) = (tangents[i], tangents[i + 1]);
        let samples = ((len / 0.05).ceil() as usize).max(2);
        for k in 1..=samples {
            let u = k as f64 / samples as f64;
            let (h00, h10, h01, h11) = (
                2.0 * u.powi(3) - 3.0 * u * u + 1.0,
                u.powi(3) - 2.0 * u * u + u,
                -2.0 * u.powi(3) + 3.0 * u * u,
                u.powi(3) - u * u,
            );
            out.push([
                h00 * a[0] + h10 * len * ta[0] + h01 * b[0] + h11 * len * tb[0],
                h00 * a[1] + h10 * len * ta[1] + h01 * b[1] + h11 * len * tb[1],
            ]);
        }
    }
    out
}

/// Spline from the vehicle to the goal, bent around known obstacles with
/// inserted via-points.
fn spline_path(
    cfg: &PlannerConfig,
    p: Point,
    heading: f64,
    goal: &crate::env::Goal,
    known: &KnownObstacles,
) -> Option<Vec<Point>> {
    let start_dir = [heading.cos(), heading.sin()];
    let end_dir = goal.heading.map(|h| [h.cos(), h.sin()]);
    let mut knots = vec![p, goal.position];
    for _ in 0..8 {
        let curve = hermite(&knots, start_dir, end_dir);
        let Some(k) = curve
            .windows(2)
            .position(|w| !known.segment_free(w[0], w[1]))
        else {
            return Some(curve);
        };
        let q = curve[k + 1];
        let d = [curve[k + 1][0] - curve[k][0], curve[k + 1][1] - curve[k][1]];
        let norm = d[0].hypot(d[1]).max(1e-12);
        let normal = [-d[1] / norm, d[0] / norm];
        // insert after the last knot the curve has already passed
        let slot = knots
            .iter()
            .skip(1)
            .position(|kn| curve[..=k].iter().all(|c| dist(*c, *kn) > 1e-9))
            .map_or(knots.len() - 1, |i| i + 1);
        let prev = knots[slot - 1];
        let via = (1..=8)
            .flat_map(|m| {
                let off = m as f64 * 0.5 + cfg.clearance;
                [1.0, -1.0].map(|sgn| [q[0] + sgn * off * normal[0], q[1] + sgn * off * normal[1]])
            })
            .find(|v| !known.is_blocked(*v) && known.segment_free(prev, *v))?;
        knots.insert(slot, via);
    }
    let curve = hermite(&knots, start_dir, end_dir);
    known.path_free(&curve).then_some(curve)
}

/// Segment index and arc position of the point of `path` closest to `p`.
fn closest_on_path(path: &[Point], p: Point) -> (usize, f64) {
    let mut best = (0, 0.0, f64::INFINITY);
    let mut s0 = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((p[0] - w[0][0]) * d[0] + (p[1] - w[0][1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [w[0][0] + t * d[0], w[0][1] + t * d[1]];
        let e = dist(p, q);
        if e < best.2 {
            best = (i, s0 + t * len2.sqrt(), e);
        }
        s0 += len2.sqrt();
    }
    (best.0, best.1)
}

/// Point `ahead` metres further along `path` than the projection of `p`;
/// the final waypoint when the path runs out.
fn point_ahead(path: &[Point], p: Point, ahead: f64) -> Point {
    let (_, s) = closest_on_path(path, p);
    let target = s + ahead;
    let mut s0 = 0.0;
    for w in path.windows(2) {
        let len = dist(w[0], w[1]);
        if s0 + len >= target && len > 0.0 {
            let t = (target - s0) / len;
            return [
                w[0][0] + t * (w[1][0] - w[0][0]),
                w[0][1] + t * (w[1][1] - w[0][1]),
            ];
        }
        s0 += len;
    }
    *path.last().expect("non-empty path")
}

/// Unit direction of the path segment nearest to `q`.
fn direction_at(path: &[Point], q: Point) -> Point {
    let (seg, _) = closest_on_path(path, q);
    let w = [path[seg], path[(seg + 1).min(path.len() - 1)]];
    let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
    let l = d[0].hypot(d[1]);
    if l > 0.0 {
        [d[0] / l, d[1] / l]
    } else {
        [0.0, 0.0]
    }
}

/// Open-loop positions of the vehicle under the planner with no disturbance,
/// used to show that planners alone walk into hidden obstacles.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    planner: &mut PlannerState,
    model: &VehicleModel,
    x0: &[f64],
    goal: &crate::env::Goal,
    map: &KnownFreeMap,
    workspace: &Rect,
    dt: f64,
    steps: usize,
) -> Vec<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut out = vec![x.clone()];
    let d = model.no_disturbance();
    for k in 0..steps {
        let u = planner
            .plan_control(k as f64 * dt, &x, goal, map, workspace, model)
            .control;
        x = crate::sim::integrate(model, &x, &u, &d, dt, 0.01);
        out.push(x.clone());
        if dist([x[0], x[1]], goal.position) <= goal.radius {
            break;
        }
    }
    out
}
