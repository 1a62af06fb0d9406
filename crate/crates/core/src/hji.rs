//! Grid solver for the avoid-type Hamilton-Jacobi-Isaacs variational inequality
//!
//! ```text
//! min{ D_tau V + H(x, grad V), l(x) - V } = 0,   V(0, x) = l(x),   tau <= 0
//! ```
//!
//! Each pseudo-time step moves `tau` back by `dt`:
//! `V <- min(V + dt * H_num(D-V, D+V), l)`, where `H_num` is the
//! Lax-Friedrichs closure of the max-min Hamiltonian. Updates are Jacobi
//! (every node reads the previous iterate), so results never depend on the
//! visiting order.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DissipationMode, VehicleModel};
use crate::error::{Error, Result};
use crate::grid::{GridIndex, NodeMask, ScalarField, StateGrid, MAX_DIMS};

const WENO_EPS: f64 = 1e-6;
const MIN_DT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DerivativeOrder {
    /// One-sided first differences, forward Euler in pseudo-time.
    #[default]
    #[serde(rename = "1")]
    First,
    /// Third-order WENO reconstruction, two-stage SSP Runge-Kutta.
    #[serde(rename = "3")]
    Third,
}

impl DerivativeOrder {
    /// Stencil half-width along each axis.
    pub fn radius(self) -> usize {
        match self {
            DerivativeOrder::First => 1,
            DerivativeOrder::Third => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cfl_number: f64,
    /// Largest per-sweep change (value units) accepted as converged.
    pub convergence_tol: f64,
    pub max_iterations: usize,
    pub derivative_order: DerivativeOrder,
    pub dissipation_mode: DissipationMode,
    /// Change at or below which a queued node counts as unchanged in local
    /// updates. Derived from the value range of `l` when unset.
    pub delta_tol: Option<f64>,
    /// Hold nodes on non-periodic grid edges where `l <= 0` at `V = l`
    /// instead of advancing them with one-sided differences.
    pub pin_edges: bool,
    /// Hold every node where `l <= 0` at `V = l`. Level sets of `V` at or
    /// above zero are unchanged in exact arithmetic.
    pub pin_unsafe: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_number: 0.5,
            convergence_tol: 1e-4,
            max_iterations: 20_000,
            derivative_order: DerivativeOrder::First,
            dissipation_mode: DissipationMode::Local,
            delta_tol: None,
            pin_edges: true,
            pin_unsafe: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_number > 0.0 && self.cfl_number <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cfl_number {} outside (0, 1]",
                self.cfl_number
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "convergence_tol {} must be positive",
                self.convergence_tol
            )));
        }
        if let Some(tol) = self.delta_tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "delta_tol {tol} must be positive"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub elapsed_seconds: f64,
    /// Largest per-node change over the final sweep.
    pub final_residual: f64,
    pub nodes_updated_total: u64,
    pub converged: bool,
}

/// One-sided first differences `(D-, D+)` of `field` at `idx`.
///
/// Non-periodic edges use linear extrapolation, which makes the missing side
/// equal to the available one.
pub fn upwind_gradient(
    field: &ScalarField,
    idx: &GridIndex,
    order: DerivativeOrder,
) -> (Vec<f64>, Vec<f64>) {
    let g = field.grid();
    let n = g.ndim();
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    let linear = g.linear_index(idx);
    for axis in 0..n {
        let (l, r) = axis_derivatives(g, field.values(), linear, idx.coords[axis], axis, order);
        left[axis] = l;
        right[axis] = r;
    }
    (left, right)
}

/// Lax-Friedrichs numerical Hamiltonian with dissipation bounds taken at `x`.
pub fn numerical_hamiltonian(model: &VehicleModel, x: &[f64], left: &[f64], right: &[f64]) -> f64 {
    let alpha = model.control_jacobian_bounds(x);
    numerical_hamiltonian_with(model, x, left, right, &alpha)
}

/// `H((D- + D+)/2) + sum_i alpha_i (D+_i - D-_i) / 2`.
///
/// The dissipation enters with a plus sign because the update adds `dt * H`
/// while stepping `tau` backwards; this keeps the scheme monotone under CFL.
pub fn numerical_hamiltonian_with(
    model: &VehicleModel,
    x: &[f64],
    left: &[f64],
    right: &[f64],
    alpha: &[f64],
) -> f64 {
    let n = left.len();
    let mut avg = [0.0; MAX_DIMS];
    let mut diss = 0.0;
    for i in 0..n {
        avg[i] = 0.5 * (left[i] + right[i]);
        diss += 0.5 * alpha[i] * (right[i] - left[i]);
    }
    model.hamiltonian(x, &avg[..n]) + diss
}

/// Reusable per-grid stepping state.
pub struct Stepper<'m> {
    grid: Arc<StateGrid>,
    model: &'m VehicleModel,
    order: DerivativeOrder,
    mode: DissipationMode,
    dt: f64,
    axis_coords: Vec<Vec<f64>>,
    heading: Option<(usize, Vec<(f64, f64)>)>,
    global_alpha: [f64; MAX_DIMS],
    // per-node local bounds, `ndim` entries per node; empty in global mode
    local_alpha: Vec<f64>,
    stage: Vec<f64>,
    out: Vec<f64>,
    pin_edges: bool,
    pin_unsafe: bool,
}

impl<'m> Stepper<'m> {
    pub fn new(grid: Arc<StateGrid>, model: &'m VehicleModel, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        if grid.ndim() != model.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}-axis grid for a {}-state model",
                grid.ndim(),
                model.state_dim()
            )));
        }
        let n = grid.ndim();
        let axis_coords: Vec<Vec<f64>> = (0..n).map(|a| grid.axis_coords(a)).collect();
        let heading = model.heading_axis().map(|axis| {
            (
                axis,
                axis_coords[axis]
                    .iter()
                    .map(|phi| phi.sin_cos())
                    .collect::<Vec<_>>(),
            )
        });
        let mut global_alpha = [0.0; MAX_DIMS];
        let galpha = model.global_jacobian_bounds();
        global_alpha[..n].copy_from_slice(&galpha);

        let mut stepper = Stepper {
            grid,
            model,
            order: cfg.derivative_order,
            mode: cfg.dissipation_mode,
            dt: 0.0,
            axis_coords,
            heading,
            global_alpha,
            local_alpha: Vec::new(),
            stage: Vec::new(),
            out: Vec::new(),
            pin_edges: cfg.pin_edges,
            pin_unsafe: cfg.pin_unsafe,
        };
        let bound = stepper.max_rate_bound();
        // frozen dynamics: any step is stable
        stepper.dt = if bound == 0.0 {
            cfg.cfl_number
        } else {
            cfg.cfl_number / bound
        };
        if !(stepper.dt.is_finite() && stepper.dt > MIN_DT) {
            return Err(Error::CflUnderflow(stepper.dt));
        }
        Ok(stepper)
    }

    /// Largest `sum_i alpha_i / dx_i` over the grid. Fills the local bound
    /// table as a side effect.
    fn max_rate_bound(&mut self) -> f64 {
        let g = self.grid.clone();
        let n = g.ndim();
        let bound = |alpha: &[f64]| -> f64 { (0..n).map(|i| alpha[i] / g.spacing()[i]).sum() };
        match self.mode {
            DissipationMode::Global => bound(&self.global_alpha[..n]),
            DissipationMode::Local => {
                let mut table = vec![0.0; g.len() * n];
                let mut coords = [0usize; MAX_DIMS];
                let mut x = [0.0; MAX_DIMS];
                let mut worst: f64 = 0.0;
                for alpha in table.chunks_exact_mut(n) {
                    for a in 0..n {
                        x[a] = self.axis_coords[a][coords[a]];
                    }
                    self.model
                        .dissipation_into(&x[..n], DissipationMode::Local, alpha);
                    worst = worst.max(bound(alpha));
                    advance(&mut coords[..n], g.counts());
                }
                self.local_alpha = table;
                worst
            }
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Arc<StateGrid> {
        &self.grid
    }

    /// Makes the stage buffer match `v`; required before list steps at third
    /// order whenever `v` was modified outside this stepper.
    pub fn sync_stage(&mut self, v: &[f64]) {
        self.stage.clear();
        self.stage.extend_from_slice(v);
    }

    /// Keeps the stage buffer in step with an outside write to one node.
    pub fn sync_stage_node(&mut self, linear: usize, value: f64) {
        if let Some(slot) = self.stage.get_mut(linear) {
            *slot = value;
        }
    }

    /// Whether `linear` is held at `l` rather than stepped.
    pub fn is_pinned(&self, l: &[f64], linear: usize) -> bool {
        let mut coords = [0usize; MAX_DIMS];
        let n = self.grid.ndim();
        self.grid.coords_into(linear, &mut coords[..n]);
        self.pinned(l, linear, &coords[..n])
    }

    #[inline]
    fn pinned(&self, l: &[f64], linear: usize, coords: &[usize]) -> bool {
        if l[linear] > 0.0 {
            return false;
        }
        if self.pin_unsafe {
            return true;
        }
        if !self.pin_edges {
            return false;
        }
        let g = &*self.grid;
        coords
            .iter()
            .enumerate()
            .any(|(a, &i)| !g.periodic()[a] && (i == 0 || i + 1 == g.counts()[a]))
    }

    /// Explicit Euler update of `v` at one node; `l` on pinned nodes.
    #[inline]
    fn euler(&self, v: &[f64], l: &[f64], linear: usize, coords: &[usize]) -> f64 {
        if self.pinned(l, linear, coords) {
            l[linear]
        } else {
            v[linear] + self.dt * self.rate(v, linear, coords)
        }
    }

    /// `dV/d(-tau)` at one node.
    #[inline]
    fn rate(&self, v: &[f64], linear: usize, coords: &[usize]) -> f64 {
        let g = &*self.grid;
        let n = g.ndim();
        let mut x = [0.0; MAX_DIMS];
        let mut avg = [0.0; MAX_DIMS];
        let mut jump = [0.0; MAX_DIMS];
        for a in 0..n {
            x[a] = self.axis_coords[a][coords[a]];
            let (l, r) = match self.order {
                DerivativeOrder::First => {
                    let i = coords[a];
                    let c = v[linear];
                    let h = g.spacing()[a];
                    if i > 0 && i + 1 < g.counts()[a] {
                        let s = g.strides()[a];
                        ((c - v[linear - s]) / h, (v[linear + s] - c) / h)
                    } else {
                        axis_derivatives(g, v, linear, i, a, self.order)
                    }
                }
                DerivativeOrder::Third => axis_derivatives(g, v, linear, coords[a], a, self.order),
            };
            avg[a] = 0.5 * (l + r);
            jump[a] = r - l;
        }
        let trig = match &self.heading {
            Some((axis, table)) => table[coords[*axis]],
            None => (0.0, 1.0),
        };
        let h = self.model.hamiltonian_with_trig(&x[..n], trig, &avg[..n]);
        let alpha = if self.local_alpha.is_empty() {
            &self.global_alpha[..n]
        } else {
            &self.local_alpha[linear * n..(linear + 1) * n]
        };
        let mut diss = 0.0;
        for a in 0..n {
            diss += 0.5 * alpha[a] * jump[a];
        }
        h + diss
    }

    /// One step over every node. Returns the largest absolute change.
    pub fn step_all(&mut self, v: &mut [f64], l: &[f64]) -> f64 {
        let g = self.grid.clone();
        let n = g.ndim();
        let len = g.len();
        let mut out = std::mem::take(&mut self.out);
        out.clear();
        out.resize(len, 0.0);
        let mut coords = [0usize; MAX_DIMS];

        match self.order {
            DerivativeOrder::First => {
                for linear in 0..len {
                    out[linear] = self.euler(v, l, linear, &coords[..n]);
                    advance(&mut coords[..n], g.counts());
                }
            }
            DerivativeOrder::Third => {
                let mut stage = std::mem::take(&mut self.stage);
                stage.clear();
                stage.resize(len, 0.0);
                for linear in 0..len {
                    stage[linear] = self.euler(v, l, linear, &coords[..n]);
                    advance(&mut coords[..n], g.counts());
                }
                coords = [0usize; MAX_DIMS];
                for linear in 0..len {
                    out[linear] = 0.5 * (v[linear] + self.euler(&stage, l, linear, &coords[..n]));
                    if self.pinned(l, linear, &coords[..n]) {
                        out[linear] = l[linear];
                    }
                    advance(&mut coords[..n], g.counts());
                }
                self.stage = stage;
            }
        }
        let mut max_change: f64 = 0.0;
        for linear in 0..len {
            let next = out[linear].min(l[linear]);
            max_change = max_change.max((next - v[linear]).abs());
            v[linear] = next;
        }
        if self.order == DerivativeOrder::Third {
            self.stage.copy_from_slice(v);
        }
        self.out = out;
        max_change
    }

    /// One step restricted to `active`; every other node is frozen.
    /// `changes[k]` receives `|V' - V|` at `active[k]`.
    pub fn step_list(
        &mut self,
        v: &mut [f64],
        l: &[f64],
        active: &[usize],
        changes: &mut Vec<f64>,
    ) -> f64 {
        let g = self.grid.clone();
        let n = g.ndim();
        let mut out = std::mem::take(&mut self.out);
        out.clear();
        out.resize(active.len(), 0.0);
        let mut coords = [0usize; MAX_DIMS];

        match self.order {
            DerivativeOrder::First => {
                for (k, &linear) in active.iter().enumerate() {
                    g.coords_into(linear, &mut coords[..n]);
                    out[k] = self.euler(v, l, linear, &coords[..n]);
                }
            }
            DerivativeOrder::Third => {
                debug_assert_eq!(self.stage.len(), v.len(), "sync_stage before list steps");
                let mut stage = std::mem::take(&mut self.stage);
                for (k, &linear) in active.iter().enumerate() {
                    g.coords_into(linear, &mut coords[..n]);
                    out[k] = self.euler(v, l, linear, &coords[..n]);
                }
                for (k, &linear) in active.iter().enumerate() {
                    stage[linear] = out[k];
                }
                for (k, &linear) in active.iter().enumerate() {
                    g.coords_into(linear, &mut coords[..n]);
                    out[k] = if self.pinned(l, linear, &coords[..n]) {
                        l[linear]
                    } else {
                        0.5 * (v[linear] + self.euler(&stage, l, linear, &coords[..n]))
                    };
                }
                self.stage = stage;
            }
        }
        changes.clear();
        let mut max_change: f64 = 0.0;
        for (k, &linear) in active.iter().enumerate() {
            let next = out[k].min(l[linear]);
            let change = (next - v[linear]).abs();
            changes.push(change);
            max_change = max_change.max(change);
            v[linear] = next;
        }
        if self.order == DerivativeOrder::Third {
            for &linear in active {
                self.stage[linear] = v[linear];
            }
        }
        self.out = out;
        max_change
    }
}

/// Row-major odometer increment (last axis fastest).
#[inline]
fn advance(coords: &mut [usize], counts: &[usize]) {
    for a in (0..coords.len()).rev() {
        coords[a] += 1;
        if coords[a] < counts[a] {
            return;
        }
        coords[a] = 0;
    }
}

/// Value at signed `offset` along `axis`: wraps on periodic axes, linear
/// extrapolation past non-periodic edges.
#[inline]
fn stencil_value(
    g: &StateGrid,
    v: &[f64],
    linear: usize,
    i: usize,
    axis: usize,
    offset: isize,
) -> f64 {
    let count = g.counts()[axis] as isize;
    let stride = g.strides()[axis] as isize;
    let j = i as isize + offset;
    let base = linear as isize - i as isize * stride;
    if g.periodic()[axis] {
        return v[(base + j.rem_euclid(count) * stride) as usize];
    }
    if j < 0 {
        let v0 = v[base as usize];
        let v1 = v[(base + stride) as usize];
        v0 + j as f64 * (v1 - v0)
    } else if j >= count {
        let vn = v[(base + (count - 1) * stride) as usize];
        let vm = v[(base + (count - 2) * stride) as usize];
        vn + (j - count + 1) as f64 * (vn - vm)
    } else {
        v[(base + j * stride) as usize]
    }
}

#[inline]
fn axis_derivatives(
    g: &StateGrid,
    v: &[f64],
    linear: usize,
    i: usize,
    axis: usize,
    order: DerivativeOrder,
) -> (f64, f64) {
    let h = g.spacing()[axis];
    let at = |o: isize| stencil_value(g, v, linear, i, axis, o);
    match order {
        DerivativeOrder::First => {
            let c = v[linear];
            ((c - at(-1)) / h, (at(1) - c) / h)
        }
        DerivativeOrder::Third => {
            let (um2, um1, u0, up1, up2) = (at(-2), at(-1), v[linear], at(1), at(2));
            let left = weno3((um1 - um2) / h, (u0 - um1) / h, (up1 - u0) / h);
            let right = weno3((up2 - up1) / h, (up1 - u0) / h, (u0 - um1) / h);
            (left, right)
        }
    }
}

/// Third-order WENO combination of the two upwind-biased candidates built
/// from consecutive first differences `d1, d2, d3` ordered upwind to downwind.
#[inline]
fn weno3(d1: f64, d2: f64, d3: f64) -> f64 {
    let smooth0 = (d2 - d1).powi(2);
    let smooth1 = (d3 - d2).powi(2);
    let a0 = (1.0 / 3.0) / (WENO_EPS + smooth0).powi(2);
    let a1 = (2.0 / 3.0) / (WENO_EPS + smooth1).powi(2);
    let cand0 = 0.5 * (3.0 * d2 - d1);
    let cand1 = 0.5 * (d2 + d3);
    (a0 * cand0 + a1 * cand1) / (a0 + a1)
}

/// One pseudo-time step on the `active` nodes, returning the new field and the
/// largest change.
pub fn vi_step(
    v: &ScalarField,
    l: &ScalarField,
    model: &VehicleModel,
    cfg: &SolverConfig,
    active: &NodeMask,
) -> Result<(ScalarField, f64)> {
    v.ensure_same_grid(l)?;
    if active.len() != v.grid().len() {
        return Err(Error::GridMismatch(
            "active mask does not cover the grid".into(),
        ));
    }
    let mut stepper = Stepper::new(v.grid_arc().clone(), model, cfg)?;
    let mut values = v.values().to_vec();
    let list: Vec<usize> = active.iter().collect();
    let max_change = if list.len() == values.len() {
        stepper.step_all(&mut values, l.values())
    } else {
        stepper.sync_stage(&values);
        let mut changes = Vec::new();
        stepper.step_list(&mut values, l.values(), &list, &mut changes)
    };
    Ok((ScalarField::new(v.grid_arc().clone(), values)?, max_change))
}

/// Iterates full-grid steps from `v0` until the per-sweep change drops to
/// `convergence_tol`. Fails if the iteration cap is hit first.
pub fn solve(
    v0: &ScalarField,
    l: &ScalarField,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    let (v, report) = solve_capped(v0, l, model, cfg)?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    Ok((v, report))
}

/// Like [`solve`] but returns the last iterate when the cap is reached.
pub fn solve_capped(
    v0: &ScalarField,
    l: &ScalarField,
    model: &VehicleModel,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    v0.ensure_same_grid(l)?;
    let start = Instant::now();
    let mut stepper = Stepper::new(v0.grid_arc().clone(), model, cfg)?;
    let mut values = v0.values().to_vec();
    let mut report = SolveReport::default();
    let len = values.len() as u64;
    while report.iterations < cfg.max_iterations {
        let change = stepper.step_all(&mut values, l.values());
        report.iterations += 1;
        report.nodes_updated_total += len;
        report.final_residual = change;
        if change <= cfg.convergence_tol {
            report.converged = true;
            break;
        }
    }
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok((ScalarField::new(v0.grid_arc().clone(), values)?, report))
}

/// Integrates exactly `horizon` units of pseudo-time (last step shortened).
pub fn solve_horizon(
    v0: &ScalarField,
    l: &ScalarField,
    model: &VehicleModel,
    cfg: &SolverConfig,
    horizon: f64,
) -> Result<ScalarField> {
    v0.ensure_same_grid(l)?;
    let mut stepper = Stepper::new(v0.grid_arc().clone(), model, cfg)?;
    let full_dt = stepper.dt;
    let mut values = v0.values().to_vec();
    let mut elapsed = 0.0;
    while horizon - elapsed > 1e-12 {
        stepper.dt = full_dt.min(horizon - elapsed);
        stepper.step_all(&mut values, l.values());
        elapsed += stepper.dt;
    }
    ScalarField::new(v0.grid_arc().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(lo: f64, hi: f64, n: usize) -> Arc<StateGrid> {
        Arc::new(StateGrid::new(&[lo], &[hi], &[n], &[false]).unwrap())
    }

    #[test]
    fn upwind_gradient_examples() {
        let g = line(0.0, 2.0, 21);
        let lin = ScalarField::from_fn(g.clone(), |x| 2.0 * x[0]);
        for order in [DerivativeOrder::First, DerivativeOrder::Third] {
            for i in [0, 1, 10, 19, 20] {
                let (l, r) = upwind_gradient(&lin, &GridIndex::new(vec![i]), order);
                assert_abs_diff_eq!(l[0], 2.0, epsilon = 1e-9);
                assert_abs_diff_eq!(r[0], 2.0, epsilon = 1e-9);
            }
        }
        let c = ScalarField::constant(g.clone(), 3.0);
        let (l, r) = upwind_gradient(&c, &GridIndex::new(vec![4]), DerivativeOrder::First);
        assert_eq!((l[0], r[0]), (0.0, 0.0));
        let sq = ScalarField::from_fn(g, |x| x[0] * x[0]);
        let (l, r) = upwind_gradient(&sq, &GridIndex::new(vec![10]), DerivativeOrder::First);
        assert_abs_diff_eq!(l[0], 1.9, epsilon = 1e-9);
        assert_abs_diff_eq!(r[0], 2.1, epsilon = 1e-9);
    }

    #[test]
    fn third_order_is_exact_on_quadratics_away_from_edges() {
        let g = line(0.0, 2.0, 21);
        let sq = ScalarField::from_fn(g, |x| x[0] * x[0]);
        let (l, r) = upwind_gradient(&sq, &GridIndex::new(vec![10]), DerivativeOrder::Third);
        // smooth data: WENO weights approach the optimal third-order blend
        assert_abs_diff_eq!(l[0], 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r[0], 2.0, epsilon = 1e-3);
    }

    #[test]
    fn periodic_axis_wraps_in_the_stencil() {
        let g = Arc::new(
            StateGrid::new(
                &[-std::f64::consts::PI],
                &[std::f64::consts::PI],
                &[64],
                &[true],
            )
            .unwrap(),
        );
        let f = ScalarField::from_fn(g.clone(), |x| x[0].sin());
        let h = g.spacing()[0];
        let (l, r) = upwind_gradient(&f, &GridIndex::new(vec![0]), DerivativeOrder::First);
        // node 0 is at -pi where d/dx sin = -1
        assert_abs_diff_eq!(l[0], -1.0, epsilon = h);
        assert_abs_diff_eq!(r[0], -1.0, epsilon = h);
    }

    #[test]
    fn numerical_hamiltonian_examples() {
        let m = VehicleModel::dubins3_default();
        let x = [0.0, 0.0, 0.0];
        let p = [0.3, -0.7, 0.2];
        assert_abs_diff_eq!(
            numerical_hamiltonian(&m, &x, &p, &p),
            m.hamiltonian(&x, &p),
            epsilon = 1e-12
        );
        // 0.9 from the Hamiltonian at (1,0,0) plus 1.1 * 0.2 / 2 of dissipation
        let h = numerical_hamiltonian(&m, &x, &[0.9, 0.0, 0.0], &[1.1, 0.0, 0.0]);
        assert_abs_diff_eq!(h, 1.01, epsilon = 1e-12);

        let frozen = VehicleModel::Integrator1D {
            control_max: 0.0,
            drift: 0.0,
        };
        // f = 0 but the closure still needs a positive alpha to be dissipative
        let h = numerical_hamiltonian_with(&frozen, &[0.0], &[0.0], &[1.0], &[1.0]);
        assert!(h > 0.0);
        let h = numerical_hamiltonian_with(&frozen, &[0.0], &[1.0], &[0.0], &[1.0]);
        assert!(h < 0.0);
    }

    #[test]
    fn vi_fixed_point_is_left_alone() {
        let g = line(-5.0, 5.0, 41);
        let l = ScalarField::from_fn(g.clone(), |x| x[0]);
        let m = VehicleModel::Integrator1D {
            control_max: 1.0,
            drift: 0.0,
        };
        let cfg = SolverConfig::default();
        let (v, change) = vi_step(&l, &l, &m, &cfg, &NodeMask::full(41)).unwrap();
        assert_eq!(change, 0.0);
        assert_eq!(v, l);
    }

    #[test]
    fn drift_step_follows_characteristics() {
        let g = line(-5.0, 5.0, 41);
        let l = ScalarField::from_fn(g.clone(), |x| x[0]);
        let m = VehicleModel::Integrator1D {
            control_max: 0.0,
            drift: -1.0,
        };
        let cfg = SolverConfig {
            pin_edges: false,
            pin_unsafe: false,
            ..SolverConfig::default()
        };
        let dt = Stepper::new(g.clone(), &m, &cfg).unwrap().dt();
        let (v, change) = vi_step(&l, &l, &m, &cfg, &NodeMask::full(41)).unwrap();
        assert_abs_diff_eq!(change, dt, epsilon = 1e-12);
        for (a, b) in v.values().iter().zip(l.values()) {
            assert_abs_diff_eq!(*a, b - dt, epsilon = 1e-12);
        }
    }

    #[test]
    fn restricted_step_leaves_other_nodes() {
        let g = line(-5.0, 5.0, 41);
        let l = ScalarField::from_fn(g.clone(), |x| x[0]);
        let m = VehicleModel::Integrator1D {
            control_max: 0.0,
            drift: -1.0,
        };
        let active = NodeMask::from_indices(41, [3, 4, 5]);
        let cfg = SolverConfig {
            pin_unsafe: false,
            ..SolverConfig::default()
        };
        let (v, _) = vi_step(&l, &l, &m, &cfg, &active).unwrap();
        for i in 0..41 {
            assert_eq!(v.values()[i] < l.values()[i], active.contains(i));
        }
    }

    #[test]
    fn pinned_nodes_hold_l() {
        let g = line(-5.0, 5.0, 41);
        let l = ScalarField::from_fn(g.clone(), |x| x[0]);
        let v0 = ScalarField::from_fn(g.clone(), |x| x[0] - 1.0);
        let m = VehicleModel::Integrator1D {
            control_max: 0.0,
            drift: -1.0,
        };
        let cfg = SolverConfig {
            pin_unsafe: true,
            ..SolverConfig::default()
        };
        let (v, _) = vi_step(&v0, &l, &m, &cfg, &NodeMask::full(41)).unwrap();
        for ((a, b), c) in v.values().iter().zip(l.values()).zip(v0.values()) {
            if *b <= 0.0 {
                assert_eq!(a, b);
            } else {
                assert!(a < c);
            }
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let g = line(0.0, 1.0, 5);
        let m = VehicleModel::Integrator1D {
            control_max: 1.0,
            drift: 0.0,
        };
        let cfg = SolverConfig {
            cfl_number: 1.5,
            ..SolverConfig::default()
        };
        assert!(Stepper::new(g.clone(), &m, &cfg).is_err());
        let violent = VehicleModel::Integrator1D {
            control_max: 1e300,
            drift: 0.0,
        };
        assert!(matches!(
            Stepper::new(g, &violent, &SolverConfig::default()),
            Err(Error::CflUnderflow(_))
        ));
    }
}
