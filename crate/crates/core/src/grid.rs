//! Rectangular state-space grids and scalar fields over them.
//!
//! Nodes are stored row-major with the last axis fastest. Periodic axes hold
//! `count` nodes over `[lower, upper)`; the wrap-around node is implicit.
//! The first `position_dims` axes are the position block of the state.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on state dimension for stack-allocated stencil scratch.
pub const MAX_DIMS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    periodic: Vec<bool>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    position_dims: usize,
    labels: Vec<String>,
}

impl StateGrid {
    /// Builds a grid; every axis is treated as a position axis until
    /// [`StateGrid::with_position_dims`] narrows it.
    pub fn new(lower: &[f64], upper: &[f64], counts: &[usize], periodic: &[bool]) -> Result<Self> {
        let n = lower.len();
        if n == 0 || upper.len() != n || counts.len() != n || periodic.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "lower {}, upper {}, counts {}, periodic {}",
                lower.len(),
                upper.len(),
                counts.len(),
                periodic.len()
            )));
        }
        if n > MAX_DIMS {
            return Err(Error::DimensionMismatch(format!(
                "{n} axes exceeds the supported maximum of {MAX_DIMS}"
            )));
        }
        for axis in 0..n {
            if !(lower[axis] < upper[axis]) || !lower[axis].is_finite() || !upper[axis].is_finite()
            {
                return Err(Error::DegenerateExtent {
                    axis,
                    lower: lower[axis],
                    upper: upper[axis],
                });
            }
            if counts[axis] < 3 {
                return Err(Error::TooFewNodes {
                    axis,
                    count: counts[axis],
                });
            }
        }
        let spacing = (0..n)
            .map(|i| {
                let extent = upper[i] - lower[i];
                if periodic[i] {
                    extent / counts[i] as f64
                } else {
                    extent / (counts[i] - 1) as f64
                }
            })
            .collect();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            counts: counts.to_vec(),
            periodic: periodic.to_vec(),
            spacing,
            strides,
            position_dims: n,
            labels: (0..n).map(|i| format!("x{i}")).collect(),
        })
    }

    pub fn with_position_dims(mut self, position_dims: usize) -> Result<Self> {
        if position_dims == 0 || position_dims > self.ndim() {
            return Err(Error::DimensionMismatch(format!(
                "position block of {position_dims} axes on a {}-axis grid",
                self.ndim()
            )));
        }
        self.position_dims = position_dims;
        Ok(self)
    }

    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        if labels.len() != self.ndim() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} axes",
                labels.len(),
                self.ndim()
            )));
        }
        self.labels = labels.iter().map(|s| s.as_ref().to_string()).collect();
        Ok(self)
    }

    pub fn ndim(&self) -> usize {
        self.counts.len()
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn position_dims(&self) -> usize {
        self.position_dims
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn axis_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of nodes in the position sub-grid.
    pub fn position_len(&self) -> usize {
        self.counts[..self.position_dims].iter().product()
    }

    /// Number of non-position nodes stacked above each position node.
    pub fn fiber_len(&self) -> usize {
        self.counts[self.position_dims..].iter().product()
    }

    /// The grid restricted to its position axes.
    pub fn position_grid(&self) -> StateGrid {
        let k = self.position_dims;
        StateGrid::new(
            &self.lower[..k],
            &self.upper[..k],
            &self.counts[..k],
            &self.periodic[..k],
        )
        .and_then(|g| g.with_labels(&self.labels[..k]))
        .expect("sub-grid of a valid grid is valid")
    }

    /// Position-node index of a full-grid linear index.
    pub fn position_index_of(&self, linear: usize) -> usize {
        linear / self.fiber_len()
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing[axis]
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis])
            .map(|i| self.coord(axis, i))
            .collect()
    }

    pub fn linear_index(&self, idx: &GridIndex) -> usize {
        idx.coords
            .iter()
            .zip(&self.strides)
            .map(|(c, s)| c * s)
            .sum()
    }

    pub fn grid_index(&self, mut linear: usize) -> GridIndex {
        let mut coords = vec![0; self.ndim()];
        for (axis, stride) in self.strides.iter().enumerate() {
            coords[axis] = linear / stride;
            linear %= stride;
        }
        GridIndex { coords }
    }

    /// Writes the coordinates of node `linear` into `out`.
    pub fn coords_into(&self, mut linear: usize, out: &mut [usize]) {
        for (axis, stride) in self.strides.iter().enumerate() {
            out[axis] = linear / stride;
            linear %= stride;
        }
    }

    pub fn state_of(&self, idx: &GridIndex) -> Vec<f64> {
        idx.coords
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    pub fn state_of_linear(&self, linear: usize) -> Vec<f64> {
        self.state_of(&self.grid_index(linear))
    }

    /// Length of a cell diagonal over the position axes.
    pub fn position_cell_diagonal(&self) -> f64 {
        self.spacing[..self.position_dims]
            .iter()
            .map(|h| h * h)
            .sum::<f64>()
            .sqrt()
    }

    /// Length of the position-extent diagonal.
    pub fn position_diameter(&self) -> f64 {
        (0..self.position_dims)
            .map(|i| (self.upper[i] - self.lower[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Maps periodic coordinates into `[lower, upper)`; leaves other axes untouched.
    pub fn wrap_state(&self, x: &mut [f64]) {
        for axis in 0..self.ndim() {
            if self.periodic[axis] {
                x[axis] = wrap_into(x[axis], self.lower[axis], self.upper[axis]);
            }
        }
    }

    /// True if every non-periodic coordinate lies inside the grid extent.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.ndim()
            && (0..self.ndim()).all(|axis| {
                self.periodic[axis]
                    || (x[axis] >= self.lower[axis] - BOUNDS_SLACK * self.spacing[axis]
                        && x[axis] <= self.upper[axis] + BOUNDS_SLACK * self.spacing[axis])
            })
    }

    /// Neighbor of `i` along `axis` at signed `offset`, honoring wrap and clipping.
    pub fn step(&self, axis: usize, i: usize, offset: isize) -> Option<usize> {
        let n = self.counts[axis] as isize;
        let j = i as isize + offset;
        if self.periodic[axis] {
            Some(j.rem_euclid(n) as usize)
        } else if (0..n).contains(&j) {
            Some(j as usize)
        } else {
            None
        }
    }

    pub fn same_shape(&self, other: &StateGrid) -> bool {
        self.counts == other.counts
            && self.periodic == other.periodic
            && self.position_dims == other.position_dims
            && self
                .lower
                .iter()
                .chain(&self.upper)
                .zip(other.lower.iter().chain(&other.upper))
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }
}

const BOUNDS_SLACK: f64 = 1e-9;

pub(crate) fn wrap_into(v: f64, lower: f64, upper: f64) -> f64 {
    let period = upper - lower;
    let mut w = (v - lower).rem_euclid(period) + lower;
    if w >= upper {
        w = lower;
    }
    w
}

/// Integer coordinates of a grid node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub coords: Vec<usize>,
}

impl GridIndex {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }
}

/// Node-indexed values over a [`StateGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<StateGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<StateGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at node {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<StateGrid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Evaluates `f` at every node's state.
    pub fn from_fn(grid: Arc<StateGrid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let n = grid.len();
        let mut values = Vec::with_capacity(n);
        let mut coords = vec![0usize; grid.ndim()];
        let mut x = vec![0.0; grid.ndim()];
        for linear in 0..n {
            grid.coords_into(linear, &mut coords);
            for (axis, &c) in coords.iter().enumerate() {
                x[axis] = grid.coord(axis, c);
            }
            values.push(f(&x));
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }
    pub fn grid_arc(&self) -> &Arc<StateGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: &GridIndex) -> f64 {
        self.values[self.grid.linear_index(idx)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "counts {:?} vs {:?}",
                self.grid.counts(),
                other.grid.counts()
            )))
        }
    }

    /// Multilinear interpolation at `x`; periodic axes are wrapped first.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let cell = self.locate(x)?;
        Ok(cell.blend(|linear| self.values[linear]))
    }

    pub(crate) fn locate(&self, x: &[f64]) -> Result<Cell> {
        Cell::locate(&self.grid, x)
    }

    /// Central-difference gradient at a node; one-sided at non-periodic edges.
    pub fn node_gradient(&self, linear: usize, out: &mut [f64]) {
        let g = &*self.grid;
        let mut coords = [0usize; MAX_DIMS];
        g.coords_into(linear, &mut coords[..g.ndim()]);
        for axis in 0..g.ndim() {
            let i = coords[axis];
            let stride = g.strides[axis] as isize;
            let h = g.spacing[axis];
            let lo = g.step(axis, i, -1);
            let hi = g.step(axis, i, 1);
            let at = |j: usize| {
                let delta = (j as isize - i as isize) * stride;
                self.values[(linear as isize + delta) as usize]
            };
            out[axis] = match (lo, hi) {
                (Some(a), Some(b)) => (at(b) - at(a)) / (2.0 * h),
                (None, Some(b)) => (at(b) - self.values[linear]) / h,
                (Some(a), None) => (self.values[linear] - at(a)) / h,
                (None, None) => 0.0,
            };
        }
    }

    /// Gradient at an off-grid state: node gradients of the enclosing cell,
    /// blended with the interpolation weights.
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let cell = self.locate(x)?;
        let n = self.grid.ndim();
        let mut acc = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        cell.for_each_corner(|linear, w| {
            if w != 0.0 {
                self.node_gradient(linear, &mut scratch);
                for (a, s) in acc.iter_mut().zip(&scratch) {
                    *a += w * s;
                }
            }
        });
        Ok(acc)
    }
}

/// The enclosing cell of a query point plus per-axis weights.
pub(crate) struct Cell {
    base: [usize; MAX_DIMS],
    next: [usize; MAX_DIMS],
    frac: [f64; MAX_DIMS],
    strides: [usize; MAX_DIMS],
    ndim: usize,
}

impl Cell {
    fn locate(grid: &StateGrid, x: &[f64]) -> Result<Cell> {
        let n = grid.ndim();
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} on a {n}-axis grid",
                x.len()
            )));
        }
        let mut cell = Cell {
            base: [0; MAX_DIMS],
            next: [0; MAX_DIMS],
            frac: [0.0; MAX_DIMS],
            strides: [0; MAX_DIMS],
            ndim: n,
        };
        for axis in 0..n {
            let count = grid.counts[axis];
            let h = grid.spacing[axis];
            cell.strides[axis] = grid.strides[axis];
            if grid.periodic[axis] {
                let v = wrap_into(x[axis], grid.lower[axis], grid.upper[axis]);
                let t = (v - grid.lower[axis]) / h;
                let i = (t.floor() as usize).min(count - 1);
                cell.base[axis] = i;
                cell.next[axis] = (i + 1) % count;
                cell.frac[axis] = (t - i as f64).clamp(0.0, 1.0);
            } else {
                let (lo, hi) = (grid.lower[axis], grid.upper[axis]);
                let v = x[axis];
                if !v.is_finite() || v < lo - BOUNDS_SLACK * h || v > hi + BOUNDS_SLACK * h {
                    return Err(Error::OutOfBounds {
                        axis,
                        value: v,
                        lower: lo,
                        upper: hi,
                    });
                }
                let t = ((v - lo) / h).clamp(0.0, (count - 1) as f64);
                let i = (t.floor() as usize).min(count - 2);
                cell.base[axis] = i;
                cell.next[axis] = i + 1;
                cell.frac[axis] = t - i as f64;
            }
        }
        Ok(cell)
    }

    pub(crate) fn for_each_corner(&self, mut f: impl FnMut(usize, f64)) {
        for corner in 0..(1usize << self.ndim) {
            let mut w = 1.0;
            let mut linear = 0;
            for axis in 0..self.ndim {
                if corner >> axis & 1 == 1 {
                    w *= self.frac[axis];
                    linear += self.next[axis] * self.strides[axis];
                } else {
                    w *= 1.0 - self.frac[axis];
                    linear += self.base[axis] * self.strides[axis];
                }
            }
            f(linear, w);
        }
    }

    pub(crate) fn blend(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_corner(|linear, w| {
            if w != 0.0 {
                acc += w * value(linear);
            }
        });
        acc
    }
}

/// A dense membership mask over the nodes of some grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    bits: Vec<bool>,
}

impl NodeMask {
    pub fn empty(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }
    pub fn full(len: usize) -> Self {
        Self {
            bits: vec![true; len],
        }
    }
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }
    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(len);
        for i in indices {
            m.bits[i] = true;
        }
        m
    }
    pub fn len(&self) -> usize {
        self.bits.len()
    }
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }
    pub fn insert(&mut self, i: usize) -> bool {
        !std::mem::replace(&mut self.bits[i], true)
    }
    pub fn remove(&mut self, i: usize) -> bool {
        std::mem::replace(&mut self.bits[i], false)
    }
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
    pub fn none(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
    pub fn is_subset_of(&self, other: &NodeMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }
    pub fn union_with(&mut self, other: &NodeMask) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Lifts a position-node mask to every node of `grid` above those positions.
    pub fn extrude(&self, grid: &StateGrid) -> NodeMask {
        assert_eq!(
            self.len(),
            grid.position_len(),
            "mask is not over the position sub-grid"
        );
        let fiber = grid.fiber_len();
        let mut bits = Vec::with_capacity(grid.len());
        for &b in &self.bits {
            bits.extend(std::iter::repeat_n(b, fiber));
        }
        NodeMask { bits }
    }
}

/// Per-position values copied unchanged along the non-position axes.
pub fn extrude_values(grid: &StateGrid, per_position: &[f64]) -> Vec<f64> {
    let fiber = grid.fiber_len();
    let mut out = Vec::with_capacity(grid.len());
    for &v in per_position {
        out.extend(std::iter::repeat_n(v, fiber));
    }
    out
}

const FIELD_MAGIC: &[u8; 8] = b"HJFIELD1";

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    periodic: Vec<bool>,
    position_dims: usize,
    labels: Vec<String>,
    order: String,
}

/// Writes a field as: 8-byte magic, u64 LE header length, JSON grid header,
/// then one f64 LE per node in row-major order (last axis fastest).
pub fn write_field(mut w: impl Write, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let header = FieldHeader {
        lower: g.lower.clone(),
        upper: g.upper.clone(),
        counts: g.counts.clone(),
        periodic: g.periodic.clone(),
        position_dims: g.position_dims,
        labels: g.labels.clone(),
        order: "row-major-last-fastest".into(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(mut r: impl Read) -> Result<ScalarField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("header of {len} bytes")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let h: FieldHeader = serde_json::from_slice(&json)?;
    if h.order != "row-major-last-fastest" {
        return Err(Error::Format(format!("unsupported node order {}", h.order)));
    }
    let grid = StateGrid::new(&h.lower, &h.upper, &h.counts, &h.periodic)?
        .with_position_dims(h.position_dims)?
        .with_labels(&h.labels)?;
    let mut raw = vec![0u8; grid.len() * 8];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Format(format!("truncated values: {e}")))?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ScalarField::new(Arc::new(grid), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn spacing_follows_axis_kind() {
        let g = StateGrid::new(&[0.0, 0.0], &[10.0, 10.0], &[11, 11], &[false, false]).unwrap();
        assert_eq!(g.spacing(), &[1.0, 1.0]);
        let g = StateGrid::new(&[-PI, 0.0], &[PI, 1.0], &[8, 5], &[true, false]).unwrap();
        assert_abs_diff_eq!(g.spacing()[0], 2.0 * PI / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.spacing()[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            StateGrid::new(&[0.0], &[1.0], &[2], &[false]),
            Err(Error::TooFewNodes { axis: 0, count: 2 })
        ));
        assert!(matches!(
            StateGrid::new(&[1.0], &[1.0], &[5], &[false]),
            Err(Error::DegenerateExtent { .. })
        ));
        assert!(matches!(
            StateGrid::new(&[0.0, 0.0], &[1.0], &[5], &[false]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn index_round_trip_last_axis_fastest() {
        let g = StateGrid::new(&[0.0; 3], &[1.0; 3], &[3, 4, 5], &[false; 3]).unwrap();
        assert_eq!(g.strides(), &[20, 5, 1]);
        for linear in 0..g.len() {
            assert_eq!(g.linear_index(&g.grid_index(linear)), linear);
        }
    }

    #[test]
    fn interpolation_examples() {
        let g = Arc::new(StateGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[3, 3], &[false; 2]).unwrap());
        let c = ScalarField::constant(g.clone(), 2.5);
        assert_abs_diff_eq!(c.interpolate(&[0.37, 0.81]).unwrap(), 2.5, epsilon = 1e-12);

        let g1 = Arc::new(StateGrid::new(&[0.0], &[2.0], &[3], &[false]).unwrap());
        let f = ScalarField::new(g1, vec![0.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(f.interpolate(&[0.5]).unwrap(), 0.5, epsilon = 1e-12);

        // corners (0,0)=0, (1,0)=1, (0,1)=1, (1,1)=2 on the first cell of a 3x3 grid
        let g2 = Arc::new(StateGrid::new(&[0.0, 0.0], &[2.0, 2.0], &[3, 3], &[false; 2]).unwrap());
        let f2 = ScalarField::from_fn(g2, |x| x[0] + x[1]);
        assert_abs_diff_eq!(f2.interpolate(&[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_rejects_out_of_bounds_but_wraps_periodic() {
        let g = Arc::new(StateGrid::new(&[0.0, -PI], &[1.0, PI], &[3, 8], &[false, true]).unwrap());
        let f = ScalarField::from_fn(g, |x| x[1].cos());
        assert!(matches!(
            f.interpolate(&[1.5, 0.0]),
            Err(Error::OutOfBounds { axis: 0, .. })
        ));
        let a = f.interpolate(&[0.5, 0.3]).unwrap();
        let b = f.interpolate(&[0.5, 0.3 + 2.0 * PI]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        // between the last node and the implicit wrap node
        let near_pi = f.interpolate(&[0.5, PI - 0.1]).unwrap();
        assert!(near_pi < -0.7);
    }

    #[test]
    fn field_file_round_trip() {
        let g = Arc::new(
            StateGrid::new(
                &[0.0, 0.0, -PI],
                &[1.0, 2.0, PI],
                &[3, 4, 5],
                &[false, false, true],
            )
            .unwrap()
            .with_position_dims(2)
            .unwrap()
            .with_labels(&["px", "py", "phi"])
            .unwrap(),
        );
        let f = ScalarField::from_fn(g, |x| x[0] - 2.0 * x[1] + x[2].sin());
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(read_field(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn extrusion_repeats_along_fiber() {
        let g = StateGrid::new(&[0.0, 0.0, 0.0], &[1.0; 3], &[3, 3, 4], &[false; 3])
            .unwrap()
            .with_position_dims(2)
            .unwrap();
        let m = NodeMask::from_indices(9, [4]);
        let e = m.extrude(&g);
        assert_eq!(e.count(), 4);
        assert!(e.iter().all(|i| g.position_index_of(i) == 4));
    }
}
