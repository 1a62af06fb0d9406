//! Ground-truth geometry, simulated range sensors and the fused map of
//! known free space.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{NodeMask, ScalarField, StateGrid};
use crate::sdf::signed_distance;

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    /// Signed distance: positive outside, non-positive inside.
    fn signed_distance(&self, p: Point) -> f64 {
        let dx = (self.min[0] - p[0]).max(p[0] - self.max[0]);
        let dy = (self.min[1] - p[1]).max(p[1] - self.max[1]);
        if dx <= 0.0 && dy <= 0.0 {
            dx.max(dy)
        } else {
            dx.max(0.0).hypot(dy.max(0.0))
        }
    }

    /// Parameter interval of `a + t (b - a)` inside the rectangle (slab test).
    fn clip(&self, a: Point, b: Point) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..2 {
            let d = b[i] - a[i];
            if d == 0.0 {
                if a[i] < self.min[i] || a[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let (mut lo, mut hi) = ((self.min[i] - a[i]) / d, (self.max[i] - a[i]) / d);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Obstacle {
    Rect { min: Point, max: Point },
    Circle { center: Point, radius: f64 },
}

impl Obstacle {
    pub fn rect(min: Point, max: Point) -> Self {
        Obstacle::Rect { min, max }
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Obstacle::Circle { center, radius }
    }

    pub fn bounding_box(&self) -> Rect {
        match *self {
            Obstacle::Rect { min, max } => Rect::new(min, max),
            Obstacle::Circle { center, radius } => Rect::new(
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Closed membership: boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        self.signed_distance(p) <= 0.0
    }

    /// Euclidean distance to the obstacle, negative inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match *self {
            Obstacle::Rect { min, max } => Rect::new(min, max).signed_distance(p),
            Obstacle::Circle { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) - radius
            }
        }
    }

    /// Smallest `t` in `[0, 1]` where `a + t (b - a)` touches the obstacle.
    pub fn first_hit(&self, a: Point, b: Point) -> Option<f64> {
        let (t0, t1) = match *self {
            Obstacle::Rect { min, max } => Rect::new(min, max).clip(a, b)?,
            Obstacle::Circle { center, radius } => {
                let d = [b[0] - a[0], b[1] - a[1]];
                let f = [a[0] - center[0], a[1] - center[1]];
                let qa = d[0] * d[0] + d[1] * d[1];
                let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let qc = f[0] * f[0] + f[1] * f[1] - radius * radius;
                if qa == 0.0 {
                    return (qc <= 0.0).then_some(0.0);
                }
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                ((-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa))
            }
        };
        if t1 < 0.0 || t0 > 1.0 {
            None
        } else {
            Some(t0.max(0.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub position: Point,
    pub radius: f64,
    /// Preferred arrival heading; only the spline planner uses it.
    #[serde(default)]
    pub heading: Option<f64>,
}

/// The true world: workspace, obstacles unknown to the vehicle, and the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub workspace: Rect,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub goal: Goal,
}

impl Environment {
    /// The single-obstacle layout used throughout the examples.
    pub fn running_example() -> Self {
        Self {
            workspace: Rect::new([0.0, 0.0], [10.0, 10.0]),
            obstacles: vec![Obstacle::rect([4.5, 1.0], [6.5, 4.0])],
            goal: Goal {
                position: [8.5, 3.0],
                radius: 0.3,
                heading: Some(-PI / 2.0),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = &self.workspace;
        if !(ws.width() > 0.0 && ws.height() > 0.0) {
            return Err(Error::Scenario(
                "workspace must have positive width and height".into(),
            ));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            let valid = match *o {
                Obstacle::Rect { min, max } => min[0] < max[0] && min[1] < max[1],
                Obstacle::Circle { radius, .. } => radius > 0.0,
            };
            if !valid {
                return Err(Error::Scenario(format!("obstacle {k} is degenerate")));
            }
            if !ws.contains_rect(&o.bounding_box()) {
                return Err(Error::Scenario(format!(
                    "obstacle {k} extends outside the workspace"
                )));
            }
        }
        if !(self.goal.radius > 0.0) {
            return Err(Error::Scenario("goal radius must be positive".into()));
        }
        if !ws.contains(self.goal.position) {
            return Err(Error::Scenario("goal lies outside the workspace".into()));
        }
        if self
            .obstacles
            .iter()
            .any(|o| o.contains(self.goal.position))
        {
            return Err(Error::Scenario(
                "goal center lies inside an obstacle".into(),
            ));
        }
        Ok(())
    }

    /// Inside an obstacle or outside the workspace.
    pub fn in_collision(&self, p: Point) -> bool {
        !self.workspace.contains(p) || self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Distance to the nearest obstacle or workspace wall; non-positive in collision.
    pub fn clearance(&self, p: Point) -> f64 {
        let wall = -self.workspace.signed_distance(p);
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p))
            .fold(wall, f64::min)
    }

    /// Exact test of the closed segment `a`-`b` against the true geometry.
    pub fn segment_collides(&self, a: Point, b: Point) -> bool {
        self.in_collision(a)
            || self.in_collision(b)
            || self.obstacles.iter().any(|o| o.first_hit(a, b).is_some())
    }

    /// Distance along the unit direction `dir` from `p` to the first obstacle
    /// or wall, capped at `max_range`. The flag is true when something was hit.
    pub fn ray_cast(&self, p: Point, dir: Point, max_range: f64) -> (f64, bool) {
        let far = [p[0] + dir[0] * max_range, p[1] + dir[1] * max_range];
        let mut t = 1.0;
        let mut hit = false;
        if let Some((_, exit)) = self.workspace.clip(p, far) {
            if exit < 1.0 {
                t = exit.max(0.0);
                hit = true;
            }
        }
        for o in &self.obstacles {
            if let Some(th) = o.first_hit(p, far) {
                if th <= t {
                    t = th;
                    hit = true;
                }
            }
        }
        (t * max_range, hit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Lidar,
    Camera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub kind: SensorKind,
    pub range: f64,
    /// Field-of-view width in radians; ignored by lidar.
    #[serde(default = "default_fov")]
    pub fov: f64,
    pub ray_count: usize,
}

fn default_fov() -> f64 {
    PI / 3.0
}

impl SensorSpec {
    pub fn lidar() -> Self {
        Self {
            kind: SensorKind::Lidar,
            range: 3.0,
            fov: TAU,
            ray_count: 360,
        }
    }

    pub fn camera() -> Self {
        Self {
            kind: SensorKind::Camera,
            range: 20.0,
            fov: PI / 3.0,
            ray_count: 120,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) {
            return Err(Error::Scenario(format!(
                "sensor range {} must be positive",
                self.range
            )));
        }
        if self.kind == SensorKind::Camera && !(self.fov > 0.0 && self.fov < TAU) {
            return Err(Error::Scenario(format!(
                "camera fov {} outside (0, 2pi)",
                self.fov
            )));
        }
        let min_rays = if self.kind == SensorKind::Camera {
            2
        } else {
            1
        };
        if self.ray_count < min_rays {
            return Err(Error::Scenario(format!(
                "sensor needs at least {min_rays} rays"
            )));
        }
        Ok(())
    }

    fn ray_angle(&self, heading: f64, k: usize) -> f64 {
        match self.kind {
            SensorKind::Lidar => heading + TAU * k as f64 / self.ray_count as f64,
            SensorKind::Camera => {
                heading - 0.5 * self.fov + self.fov * k as f64 / (self.ray_count - 1) as f64
            }
        }
    }

    /// Indices of the rays bracketing a bearing.
    fn bracketing_rays(&self, heading: f64, bearing: f64) -> Option<[usize; 2]> {
        let n = self.ray_count;
        match self.kind {
            SensorKind::Lidar => {
                let step = TAU / n as f64;
                let rel = (bearing - heading).rem_euclid(TAU);
                let k = ((rel / step).floor() as usize).min(n - 1);
                Some([k, (k + 1) % n])
            }
            SensorKind::Camera => {
                let step = self.fov / (n - 1) as f64;
                let rel = angle_diff(bearing, heading - 0.5 * self.fov);
                if rel < -step || rel > self.fov + step {
                    return None;
                }
                let k = (rel / step).floor().clamp(0.0, (n - 1) as f64) as usize;
                Some([k, (k + 1).min(n - 1)])
            }
        }
    }
}

/// `a - b` wrapped into `[-pi, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(TAU) - PI
}

/// One sensor reading: the free position nodes and the points where rays
/// struck an obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub free: NodeMask,
    pub hits: Vec<Point>,
}

/// Casts the sensor's rays from `(x[0], x[1])` facing `x[2]` and marks the
/// position nodes of `pos` seen to be free.
///
/// A node is marked when it lies within range, within half a cell of some
/// ray before that ray's first hit, and its center is directly visible from
/// the sensor.
pub fn sense(env: &Environment, spec: &SensorSpec, x: &[f64], pos: &StateGrid) -> Scan {
    let mut free = NodeMask::empty(pos.len());
    let p = [x[0], x[1]];
    let heading = x.get(2).copied().unwrap_or(0.0);
    if env.in_collision(p) {
        return Scan {
            free,
            hits: Vec::new(),
        };
    }
    let rays: Vec<(Point, f64)> = (0..spec.ray_count)
        .map(|k| {
            let a = spec.ray_angle(heading, k);
            let dir = [a.cos(), a.sin()];
            (dir, env.ray_cast(p, dir, spec.range).0)
        })
        .collect();
    let hits = rays
        .iter()
        .filter_map(|&(dir, len)| {
            let end = [p[0] + dir[0] * len, p[1] + dir[1] * len];
            (len < spec.range && env.obstacles.iter().any(|o| o.signed_distance(end) <= 1e-9))
                .then_some(end)
        })
        .collect();
    let half_cell = 0.5 * pos.spacing()[0].max(pos.spacing()[1]);

    let (cx, cy) = (pos.axis_coords(0), pos.axis_coords(1));
    for (ix, &qx) in cx.iter().enumerate() {
        if (qx - p[0]).abs() > spec.range {
            continue;
        }
        for (iy, &qy) in cy.iter().enumerate() {
            let q = [qx, qy];
            let (dx, dy) = (qx - p[0], qy - p[1]);
            let dist = dx.hypot(dy);
            if dist > spec.range || !env.workspace.contains(q) {
                continue;
            }
            let near_ray = dist <= half_cell
                || spec
                    .bracketing_rays(heading, dy.atan2(dx))
                    .is_some_and(|ks| {
                        ks.iter().any(|&k| {
                            let (dir, len) = rays[k];
                            let s = dx * dir[0] + dy * dir[1];
                            let perp = (dx * dir[1] - dy * dir[0]).abs();
                            (0.0..=len).contains(&s) && perp <= half_cell
                        })
                    });
            if near_ray && !env.segment_collides(p, q) {
                free.insert(ix * cy.len() + iy);
            }
        }
    }
    Scan { free, hits }
}

/// Position nodes sensed free at some time so far, plus the nodes nearest to
/// observed ray hits (used by planners only).
#[derive(Debug, Clone)]
pub struct KnownFreeMap {
    grid: StateGrid,
    known_free: NodeMask,
    observed_occupied: NodeMask,
}

impl KnownFreeMap {
    pub fn new(grid: StateGrid) -> Self {
        let len = grid.len();
        Self {
            grid,
            known_free: NodeMask::empty(len),
            observed_occupied: NodeMask::empty(len),
        }
    }

    /// Nodes within `radius` of `center`.
    pub fn from_disk(grid: StateGrid, center: Point, radius: f64) -> Self {
        let mut map = Self::new(grid);
        for i in 0..map.grid.len() {
            let s = map.grid.state_of_linear(i);
            if (s[0] - center[0]).hypot(s[1] - center[1]) <= radius {
                map.known_free.insert(i);
            }
        }
        map
    }

    /// Every node whose center is collision-free in the true environment.
    pub fn from_truth(grid: StateGrid, env: &Environment) -> Self {
        let mut map = Self::new(grid);
        for i in 0..map.grid.len() {
            let s = map.grid.state_of_linear(i);
            if !env.in_collision([s[0], s[1]]) {
                map.known_free.insert(i);
            }
        }
        map
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn known_free(&self) -> &NodeMask {
        &self.known_free
    }

    pub fn observed_occupied(&self) -> &NodeMask {
        &self.observed_occupied
    }

    pub fn is_known_free(&self, p: Point) -> bool {
        self.nearest_node(p)
            .is_some_and(|i| self.known_free.contains(i))
    }

    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let mut idx = [0usize; 2];
        for (axis, slot) in idx.iter_mut().enumerate() {
            let h = self.grid.spacing()[axis];
            let k = ((p[axis] - self.grid.lower()[axis]) / h).round();
            if !(k >= 0.0 && k < self.grid.counts()[axis] as f64) {
                return None;
            }
            *slot = k as usize;
        }
        Some(idx[0] * self.grid.counts()[1] + idx[1])
    }

    /// Ors `free` into the map and returns the nodes that were not known before.
    pub fn fuse(&mut self, free: &NodeMask) -> Result<NodeMask> {
        if free.len() != self.known_free.len() {
            return Err(Error::GridMismatch(format!(
                "scan covers {} nodes, map has {}",
                free.len(),
                self.known_free.len()
            )));
        }
        let fresh: Vec<usize> = free.iter().filter(|&i| self.known_free.insert(i)).collect();
        Ok(NodeMask::from_indices(free.len(), fresh))
    }

    /// Records ray hit points as known-occupied nodes.
    pub fn record_hits(&mut self, hits: &[Point]) {
        for &h in hits {
            if let Some(i) = self.nearest_node(h) {
                self.observed_occupied.insert(i);
            }
        }
    }

    /// Writes the known-free mask as a plain PBM image (black = not known
    /// free, top row = largest y).
    pub fn write_pbm(&self, mut w: impl Write) -> Result<()> {
        let (nx, ny) = (self.grid.counts()[0], self.grid.counts()[1]);
        writeln!(w, "P1")?;
        writeln!(w, "# known free space")?;
        writeln!(w, "{nx} {ny}")?;
        for iy in (0..ny).rev() {
            let row: Vec<&str> = (0..nx)
                .map(|ix| {
                    if self.known_free.contains(ix * ny + iy) {
                        "0"
                    } else {
                        "1"
                    }
                })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Implicit obstacle function for `map`: signed distance to the known free
/// set over the position sub-grid of `grid`, extruded along the other axes.
/// Nodes on the outer ring of the position grid always count as occupied,
/// so the vehicle cannot be kept safe by leaving the grid.
pub fn implicit_obstacle(map: &KnownFreeMap, grid: &Arc<StateGrid>) -> Result<ScalarField> {
    implicit_obstacle_with(map, grid, true)
}

pub fn implicit_obstacle_with(
    map: &KnownFreeMap,
    grid: &Arc<StateGrid>,
    edge_wall: bool,
) -> Result<ScalarField> {
    let pos = grid.position_grid();
    if pos.ndim() != 2 || !pos.same_shape(map.grid()) {
        return Err(Error::GridMismatch(
            "map grid differs from the state grid's position axes".into(),
        ));
    }
    let mut inside = map.known_free.clone();
    if edge_wall {
        let (nx, ny) = (pos.counts()[0], pos.counts()[1]);
        for ix in 0..nx {
            for iy in 0..ny {
                if ix == 0 || iy == 0 || ix + 1 == nx || iy + 1 == ny {
                    inside.remove(ix * ny + iy);
                }
            }
        }
    }
    Ok(signed_distance(grid, &inside))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pos_grid(n: usize) -> StateGrid {
        StateGrid::new(&[0.0, 0.0], &[10.0, 10.0], &[n, n], &[false, false]).unwrap()
    }

    fn empty_env() -> Environment {
        Environment {
            obstacles: vec![],
            ..Environment::running_example()
        }
    }

    #[test]
    fn segment_tests() {
        let r = Obstacle::rect([1.0, 1.0], [2.0, 2.0]);
        assert_abs_diff_eq!(
            r.first_hit([0.0, 1.5], [3.0, 1.5]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert!(r.first_hit([0.0, 0.0], [0.5, 3.0]).is_none());
        assert_eq!(r.first_hit([1.5, 1.5], [5.0, 5.0]), Some(0.0));
        let c = Obstacle::circle([0.0, 0.0], 1.0);
        assert_abs_diff_eq!(
            c.first_hit([-3.0, 0.0], [3.0, 0.0]).unwrap(),
            2.0 / 6.0,
            epsilon = 1e-12
        );
        assert!(c.first_hit([-3.0, 2.0], [3.0, 2.0]).is_none());
        assert!(c.first_hit([2.0, 0.0], [3.0, 0.0]).is_none());
        assert_abs_diff_eq!(r.signed_distance([0.0, 1.5]), 1.0);
        assert_abs_diff_eq!(r.signed_distance([1.5, 1.5]), -0.5);
        assert_abs_diff_eq!(r.signed_distance([3.0, 3.0]), 2f64.sqrt());
    }

    #[test]
    fn validation_catches_bad_layouts() {
        let mut env = Environment::running_example();
        env.validate().unwrap();
        env.goal.position = [5.0, 2.0];
        assert!(env.validate().is_err());
        let mut env = Environment::running_example();
        env.obstacles.push(Obstacle::circle([9.9, 5.0], 0.5));
        assert!(env.validate().is_err());
    }

    #[test]
    fn lidar_in_empty_world_marks_the_disk() {
        let env = empty_env();
        let pos = pos_grid(81);
        let scan = sense(&env, &SensorSpec::lidar(), &[5.0, 5.0, 0.3], &pos);
        for i in 0..pos.len() {
            let s = pos.state_of_linear(i);
            let d = (s[0] - 5.0).hypot(s[1] - 5.0);
            assert_eq!(scan.free.contains(i), d <= 3.0, "node at {s:?}");
        }
        assert!(scan.hits.is_empty());
    }

    #[test]
    fn camera_respects_fov_and_occlusion() {
        let env = Environment {
            obstacles: vec![Obstacle::rect([3.0, 4.5], [4.0, 5.5])],
            ..empty_env()
        };
        let pos = pos_grid(81);
        let scan = sense(&env, &SensorSpec::camera(), &[2.0, 5.0, 0.0], &pos);
        let at = |x: f64, y: f64| {
            scan.free
                .contains(((x / 0.125).round() as usize) * 81 + (y / 0.125).round() as usize)
        };
        assert!(at(2.5, 5.0));
        assert!(!at(6.0, 5.0), "behind the square");
        assert!(!at(2.0, 8.0), "outside the wedge");
        assert!(at(8.0, 1.75), "past the lower corner of the square");
        assert!(!scan.hits.is_empty());
    }

    #[test]
    fn sensor_inside_obstacle_sees_nothing() {
        let env = Environment::running_example();
        let scan = sense(&env, &SensorSpec::lidar(), &[5.0, 2.0, 0.0], &pos_grid(41));
        assert!(scan.free.none());
    }

    #[test]
    fn fuse_reports_new_nodes() {
        let mut map = KnownFreeMap::new(pos_grid(5));
        let a = NodeMask::from_indices(25, [1, 2, 3]);
        assert_eq!(map.fuse(&a).unwrap(), a);
        assert!(map.fuse(&NodeMask::from_indices(25, [2])).unwrap().none());
        let fresh = map.fuse(&NodeMask::from_indices(25, [3, 4])).unwrap();
        assert_eq!(fresh.iter().collect::<Vec<_>>(), vec![4]);
        assert!(map.fuse(&NodeMask::empty(3)).is_err());
    }

    #[test]
    fn implicit_obstacle_examples() {
        let g = Arc::new(
            StateGrid::new(
                &[0.0, 0.0, -PI],
                &[10.0, 10.0, PI],
                &[81, 81, 9],
                &[false, false, true],
            )
            .unwrap()
            .with_position_dims(2)
            .unwrap(),
        );
        let map = KnownFreeMap::from_disk(g.position_grid(), [2.0, 2.5], 1.5);
        let l = implicit_obstacle(&map, &g).unwrap();
        assert!((l.interpolate(&[2.0, 2.5, 0.0]).unwrap() - 1.5).abs() <= 0.125);

        let empty = implicit_obstacle(&KnownFreeMap::new(g.position_grid()), &g).unwrap();
        let first = empty.values()[0];
        assert!(first < 0.0 && empty.values().iter().all(|&v| v == first));
    }

    #[test]
    fn pbm_has_header_and_rows() {
        let mut map = KnownFreeMap::new(pos_grid(4));
        map.fuse(&NodeMask::from_indices(16, [3])).unwrap();
        let mut out = Vec::new();
        map.write_pbm(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "P1");
        assert_eq!(lines[2], "4 4");
        // node 3 is (ix 0, iy 3): top-left pixel
        assert_eq!(lines[3], "0 1 1 1");
    }
}
