//! Backward-reachable-set updates: full recompute, warm start from the last
//! field, and queue-driven local propagation.
//!
//! Every update returns a [`SafeSetSnapshot`]. The safe set of a snapshot is
//! `{x : V(x) > epsilon}`.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleModel;
use crate::error::{Error, Result};
use crate::grid::{read_field, write_field, GridIndex, NodeMask, ScalarField, StateGrid};
use crate::hji::{solve, DerivativeOrder, SolveReport, SolverConfig, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMethod {
    Full,
    Warm,
    Local,
}

impl UpdateMethod {
    pub const ALL: [UpdateMethod; 3] =
        [UpdateMethod::Full, UpdateMethod::Warm, UpdateMethod::Local];

    pub fn as_str(self) -> &'static str {
        match self {
            UpdateMethod::Full => "full",
            UpdateMethod::Warm => "warm",
            UpdateMethod::Local => "local",
        }
    }
}

impl fmt::Display for UpdateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(UpdateMethod::Full),
            "warm" => Ok(UpdateMethod::Warm),
            "local" => Ok(UpdateMethod::Local),
            other => Err(Error::InvalidConfig(format!(
                "unknown update method `{other}` (expected full, warm or local)"
            ))),
        }
    }
}

/// Activation level used when none is configured: one and a half position
/// cell diagonals.
pub fn default_epsilon(grid: &StateGrid) -> f64 {
    1.5 * grid.position_cell_diagonal()
}

/// A converged value field together with the level that defines its safe set.
#[derive(Debug, Clone)]
pub struct SafeSetSnapshot {
    pub value: ScalarField,
    pub computed_at: f64,
    pub epsilon: f64,
    pub method: UpdateMethod,
    pub report: SolveReport,
}

/// Sidecar metadata written next to a snapshot's field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub method: UpdateMethod,
    pub epsilon: f64,
    pub computed_at: f64,
    pub report: SolveReport,
}

impl SafeSetSnapshot {
    /// Wraps a field with the default epsilon at time zero.
    pub fn new(value: ScalarField, method: UpdateMethod, report: SolveReport) -> Self {
        let epsilon = default_epsilon(value.grid());
        Self {
            value,
            computed_at: 0.0,
            epsilon,
            method,
            report,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        assert!(epsilon >= 0.0, "epsilon must be non-negative");
        self.epsilon = epsilon;
        self
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.computed_at = t;
        self
    }

    pub fn grid(&self) -> &StateGrid {
        self.value.grid()
    }

    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        self.value.interpolate(x)
    }

    pub fn is_safe(&self, x: &[f64]) -> Result<bool> {
        Ok(self.value_at(x)? > self.epsilon)
    }

    /// Nodes whose value exceeds epsilon.
    pub fn safe_mask(&self) -> NodeMask {
        NodeMask::from_bits(
            self.value
                .values()
                .iter()
                .map(|&v| v > self.epsilon)
                .collect(),
        )
    }

    pub fn record(&self) -> SnapshotRecord {
        SnapshotRecord {
            method: self.method,
            epsilon: self.epsilon,
            computed_at: self.computed_at,
            report: self.report.clone(),
        }
    }

    /// Writes `<stem>.field` and the `<stem>.json` sidecar. Returns the field path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let field_path = dir.join(format!("{stem}.field"));
        let mut w = BufWriter::new(File::create(&field_path)?);
        write_field(&mut w, &self.value)?;
        let sidecar = File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(sidecar, &self.record())?;
        Ok(field_path)
    }

    /// Reads a field file; the sidecar is optional and defaults to a full
    /// snapshot at t = 0 with the default epsilon.
    pub fn load(field_path: &Path) -> Result<Self> {
        let value = read_field(BufReader::new(File::open(field_path)?))?;
        let sidecar = field_path.with_extension("json");
        let snap = Self::new(value, UpdateMethod::Full, SolveReport::default());
        if !sidecar.exists() {
            return Ok(snap);
        }
        let rec: SnapshotRecord = serde_json::from_reader(BufReader::new(File::open(sidecar)?))?;
        Ok(Self {
            method: rec.method,
            report: rec.report,
            ..snap.with_epsilon(rec.epsilon).with_time(rec.computed_at)
        })
    }
}

/// Solves from `V0 = l_t` to convergence.
pub fn full_recompute(
    l: &ScalarField,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<SafeSetSnapshot> {
    let (value, report) = solve(l, l, model, cfg)?;
    Ok(SafeSetSnapshot::new(value, UpdateMethod::Full, report))
}

/// `l_t` on newly freed nodes, `V_last` elsewhere, clamped to at most `l_t`.
pub fn warm_start_init(
    v_last: &ScalarField,
    l: &ScalarField,
    newly_free: &NodeMask,
) -> Result<ScalarField> {
    v_last.ensure_same_grid(l)?;
    check_mask(newly_free, l.grid())?;
    let values = v_last
        .values()
        .iter()
        .zip(l.values())
        .zip(newly_free.bits())
        .map(|((&v, &lv), &fresh)| if fresh { lv } else { v.min(lv) })
        .collect();
    ScalarField::new(l.grid_arc().clone(), values)
}

/// Solves to convergence from the warm-start initialization.
pub fn warm_solve(
    v_last: &ScalarField,
    l: &ScalarField,
    newly_free: &NodeMask,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<SafeSetSnapshot> {
    let start = Instant::now();
    let v0 = warm_start_init(v_last, l, newly_free)?;
    let (value, mut report) = solve(&v0, l, model, cfg)?;
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(SafeSetSnapshot::new(value, UpdateMethod::Warm, report))
}

/// Queue-driven update starting from the newly freed nodes; nodes that never
/// enter the queue keep their `V_last` bits. Nodes held at `l` take their new
/// value when reached but do not pass changes on to their neighbors.
pub fn local_update(
    v_last: &ScalarField,
    l: &ScalarField,
    newly_free: &NodeMask,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<SafeSetSnapshot> {
    local_update_traced(v_last, l, newly_free, model, cfg).map(|(snap, _)| snap)
}

/// Dispatches to [`full_recompute`], [`warm_solve`] or [`local_update`].
pub fn rebuild(
    method: UpdateMethod,
    v_last: &ScalarField,
    l: &ScalarField,
    newly_free: &NodeMask,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<SafeSetSnapshot> {
    match method {
        UpdateMethod::Full => full_recompute(l, model, cfg),
        UpdateMethod::Warm => warm_solve(v_last, l, newly_free, model, cfg),
        UpdateMethod::Local => local_update(v_last, l, newly_free, model, cfg),
    }
}

/// Default "unchanged" threshold: `1e-5` of the value range of `l`
/// (`1e-5` for a constant `l`).
pub fn default_delta_tol(l: &ScalarField) -> f64 {
    let (lo, hi) = l.min_max();
    let range = hi - lo;
    1e-5 * if range > 0.0 { range } else { 1.0 }
}

/// [`local_update`] that also returns every node that entered the queue.
pub fn local_update_traced(
    v_last: &ScalarField,
    l: &ScalarField,
    newly_free: &NodeMask,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<(SafeSetSnapshot, NodeMask)> {
    let start = Instant::now();
    v_last.ensure_same_grid(l)?;
    let grid = l.grid_arc().clone();
    check_mask(newly_free, &grid)?;
    let len = grid.len();
    let delta_tol = cfg.delta_tol.unwrap_or_else(|| default_delta_tol(l));
    let lv = l.values();

    let mut values = v_last.values().to_vec();
    let mut touched = NodeMask::empty(len);
    let mut report = SolveReport {
        converged: true,
        ..SolveReport::default()
    };
    if newly_free.none() {
        report.elapsed_seconds = start.elapsed().as_secs_f64();
        let value = ScalarField::new(grid, values)?;
        return Ok((
            SafeSetSnapshot::new(value, UpdateMethod::Local, report),
            touched,
        ));
    }

    let mut stepper = Stepper::new(grid.clone(), model, cfg)?;
    let radius = cfg.derivative_order.radius();
    for i in newly_free.iter() {
        values[i] = lv[i];
    }
    stepper.sync_stage(&values);

    let mut stamp = vec![0u32; len];
    let mut generation = 1u32;
    let mut active: Vec<usize> = Vec::new();
    let mut scratch = Vec::new();
    for i in newly_free.iter() {
        enqueue_with_neighbors(
            &grid,
            i,
            radius,
            &mut stamp,
            generation,
            &mut active,
            &mut scratch,
        );
    }
    let mut changes = Vec::new();
    loop {
        active.sort_unstable();
        for &i in &active {
            if touched.insert(i) {
                let v = values[i].min(lv[i]);
                values[i] = v;
                stepper.sync_stage_node(i, v);
            }
        }
        if report.iterations >= cfg.max_iterations {
            return Err(Error::QueueDidNotDrain {
                iterations: report.iterations,
                remaining: active.len(),
            });
        }
        let max_change = stepper.step_list(&mut values, lv, &active, &mut changes);
        report.iterations += 1;
        report.nodes_updated_total += active.len() as u64;
        report.final_residual = max_change;

        generation += 1;
        let survivors: Vec<usize> = active
            .iter()
            .zip(&changes)
            .filter_map(|(&i, &c)| (c > delta_tol && !stepper.is_pinned(lv, i)).then_some(i))
            .collect();
        active.clear();
        for i in survivors {
            enqueue_with_neighbors(
                &grid,
                i,
                radius,
                &mut stamp,
                generation,
                &mut active,
                &mut scratch,
            );
        }
        if active.is_empty() {
            break;
        }
    }
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    let value = ScalarField::new(grid, values)?;
    Ok((
        SafeSetSnapshot::new(value, UpdateMethod::Local, report),
        touched,
    ))
}

fn enqueue_with_neighbors(
    grid: &StateGrid,
    i: usize,
    radius: usize,
    stamp: &mut [u32],
    generation: u32,
    out: &mut Vec<usize>,
    scratch: &mut Vec<usize>,
) {
    if stamp[i] != generation {
        stamp[i] = generation;
        out.push(i);
    }
    scratch.clear();
    push_neighbors(grid, i, radius, scratch);
    for &j in scratch.iter() {
        if stamp[j] != generation {
            stamp[j] = generation;
            out.push(j);
        }
    }
}

fn push_neighbors(grid: &StateGrid, linear: usize, radius: usize, out: &mut Vec<usize>) {
    let mut rest = linear;
    for axis in (0..grid.ndim()).rev() {
        let count = grid.counts()[axis];
        let i = rest % count;
        rest /= count;
        let stride = grid.strides()[axis];
        let base = linear - i * stride;
        for r in 1..=radius as isize {
            for offset in [-r, r] {
                if let Some(j) = grid.step(axis, i, offset) {
                    let n = base + j * stride;
                    if n != linear && !out.contains(&n) {
                        out.push(n);
                    }
                }
            }
        }
    }
}

/// Nodes inside the derivative stencil of `idx`, wrapping periodic axes and
/// clipping at the others.
pub fn neighbors(idx: &GridIndex, grid: &StateGrid, order: DerivativeOrder) -> Vec<GridIndex> {
    let mut out = Vec::new();
    push_neighbors(grid, grid.linear_index(idx), order.radius(), &mut out);
    out.into_iter().map(|n| grid.grid_index(n)).collect()
}

fn check_mask(mask: &NodeMask, grid: &StateGrid) -> Result<()> {
    if mask.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "node set covers {} nodes, grid has {}",
            mask.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Node-wise comparison of two safe sets over the same grid: percentages of
/// all nodes that `a` labels unsafe while `b` labels safe (over-conservative)
/// and the reverse (under-conservative).
pub fn diff_safe_sets(a: &SafeSetSnapshot, b: &SafeSetSnapshot) -> Result<(f64, f64)> {
    a.value.ensure_same_grid(&b.value)?;
    if (a.epsilon - b.epsilon).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "snapshots use different epsilon ({} vs {})",
            a.epsilon, b.epsilon
        )));
    }
    let (mut over, mut under) = (0usize, 0usize);
    for (&va, &vb) in a.value.values().iter().zip(b.value.values()) {
        let (sa, sb) = (va > a.epsilon, vb > b.epsilon);
        if !sa && sb {
            over += 1;
        }
        if sa && !sb {
            under += 1;
        }
    }
    let n = a.value.values().len() as f64;
    Ok((100.0 * over as f64 / n, 100.0 * under as f64 / n))
}
