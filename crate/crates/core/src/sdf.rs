//! Signed-distance construction of implicit surface functions.
//!
//! Values are positive on inside nodes and negative on outside nodes. The
//! magnitude is the distance to the nearest node of opposite membership, less
//! half the smallest position spacing so the zero crossing sits between the
//! two node sets. The field is computed over the position sub-grid and
//! extruded along the remaining axes.

use std::sync::Arc;

use crate::grid::{extrude_values, NodeMask, ScalarField, StateGrid};

/// Node counts up to this size use the exact quadratic search.
pub const BRUTE_FORCE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdfMethod {
    #[default]
    Auto,
    BruteForce,
    DistanceTransform,
}

/// Signed distance for the position-node membership `inside`.
pub fn signed_distance(grid: &Arc<StateGrid>, inside: &NodeMask) -> ScalarField {
    signed_distance_with(grid, inside, SdfMethod::Auto)
}

/// Signed distance for a predicate evaluated at each position node's coordinates.
pub fn signed_distance_fn(grid: &Arc<StateGrid>, inside: impl Fn(&[f64]) -> bool) -> ScalarField {
    let pos = grid.position_grid();
    let mask = NodeMask::from_bits(
        (0..pos.len())
            .map(|i| inside(&pos.state_of_linear(i)))
            .collect(),
    );
    signed_distance(grid, &mask)
}

pub fn signed_distance_with(
    grid: &Arc<StateGrid>,
    inside: &NodeMask,
    method: SdfMethod,
) -> ScalarField {
    let pos = grid.position_grid();
    assert_eq!(
        inside.len(),
        pos.len(),
        "membership must cover the position sub-grid"
    );
    let per_position = position_signed_distance(&pos, inside, method);
    let values = extrude_values(grid, &per_position);
    ScalarField::new(grid.clone(), values).expect("signed distance is finite")
}

/// Signed distance over a position grid (no extrusion).
pub fn position_signed_distance(pos: &StateGrid, inside: &NodeMask, method: SdfMethod) -> Vec<f64> {
    let n_in = inside.count();
    let diameter = pos.position_diameter();
    if n_in == inside.len() {
        return vec![diameter; inside.len()];
    }
    if n_in == 0 {
        return vec![-diameter; inside.len()];
    }
    let method = match method {
        SdfMethod::Auto if pos.len() <= BRUTE_FORCE_LIMIT => SdfMethod::BruteForce,
        SdfMethod::Auto => SdfMethod::DistanceTransform,
        m => m,
    };
    let (to_outside, to_inside) = match method {
        SdfMethod::BruteForce => (
            brute_force_distance(pos, inside, false),
            brute_force_distance(pos, inside, true),
        ),
        _ => (
            transform_distance(pos, inside, false),
            transform_distance(pos, inside, true),
        ),
    };
    let shift = 0.5 * pos.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    inside
        .bits()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b {
                to_outside[i] - shift
            } else {
                -(to_inside[i] - shift)
            }
        })
        .collect()
}

/// Distance from each node to the nearest node whose membership equals `target`.
fn brute_force_distance(pos: &StateGrid, inside: &NodeMask, target: bool) -> Vec<f64> {
    let states: Vec<Vec<f64>> = (0..pos.len()).map(|i| pos.state_of_linear(i)).collect();
    let sites: Vec<&Vec<f64>> = states
        .iter()
        .zip(inside.bits())
        .filter_map(|(s, &b)| (b == target).then_some(s))
        .collect();
    states
        .iter()
        .map(|s| {
            sites
                .iter()
                .map(|t| {
                    s.iter()
                        .zip(t.iter())
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Exact Euclidean distance transform by separable lower-envelope sweeps.
fn transform_distance(pos: &StateGrid, inside: &NodeMask, target: bool) -> Vec<f64> {
    let mut sq: Vec<f64> = inside
        .bits()
        .iter()
        .map(|&b| if b == target { 0.0 } else { f64::INFINITY })
        .collect();
    let counts = pos.counts().to_vec();
    let strides = pos.strides().to_vec();
    let n = pos.len();
    let mut line = Vec::new();
    let mut out = Vec::new();
    for axis in 0..pos.ndim() {
        let len = counts[axis];
        let stride = strides[axis];
        let h = pos.spacing()[axis];
        // every line start: nodes whose coordinate along `axis` is zero
        for start in 0..n {
            if !(start / stride).is_multiple_of(len) {
                continue;
            }
            line.clear();
            line.extend((0..len).map(|k| sq[start + k * stride]));
            lower_envelope(&line, h, &mut out);
            for k in 0..len {
                sq[start + k * stride] = out[k];
            }
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Squared-distance transform of one line: `out[p] = min_q (h(p-q))^2 + f[q]`.
fn lower_envelope(f: &[f64], h: f64, out: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    let pos = |q: usize| q as f64 * h;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&r) => {
                    let s = ((f[q] + pos(q) * pos(q)) - (f[r] + pos(r) * pos(r)))
                        / (2.0 * (pos(q) - pos(r)));
                    if s <= *z.last().expect("breakpoints track parabolas") {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        return;
    }
    let mut k = 0;
    for (p, slot) in out.iter_mut().enumerate() {
        let x = pos(p);
        while k + 1 < v.len() && z[k + 1] < x {
            k += 1;
        }
        let d = x - pos(v[k]);
        *slot = d * d + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid1d() -> Arc<StateGrid> {
        Arc::new(StateGrid::new(&[0.0], &[10.0], &[11], &[false]).unwrap())
    }

    #[test]
    fn uniform_membership_gives_sentinels() {
        let g = grid1d();
        let all = signed_distance(&g, &NodeMask::full(11));
        assert!(all.values().iter().all(|&v| v == 10.0));
        let none = signed_distance(&g, &NodeMask::empty(11));
        assert!(none.values().iter().all(|&v| v == -10.0));
    }

    #[test]
    fn half_line_example() {
        let g = grid1d();
        let f = signed_distance_fn(&g, |x| x[0] >= 4.0);
        let at = |x: f64| f.interpolate(&[x]).unwrap();
        assert!((at(7.0) - 3.0).abs() <= 1.0);
        assert!((at(1.0) + 3.0).abs() <= 1.0);
        // zero crossing between the last outside and first inside node
        assert_abs_diff_eq!(at(3.5), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_and_brute_force_agree() {
        let g = Arc::new(StateGrid::new(&[0.0, 0.0], &[3.0, 2.0], &[13, 21], &[false; 2]).unwrap());
        let pos = g.position_grid();
        let inside = NodeMask::from_bits(
            (0..pos.len())
                .map(|i| {
                    let s = pos.state_of_linear(i);
                    (s[0] - 1.2).hypot(s[1] - 0.9) < 0.7 || s[0] > 2.6
                })
                .collect(),
        );
        let a = position_signed_distance(&pos, &inside, SdfMethod::BruteForce);
        let b = position_signed_distance(&pos, &inside, SdfMethod::DistanceTransform);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn extruded_along_heading() {
        let g = Arc::new(
            StateGrid::new(
                &[0.0, 0.0, -3.0],
                &[4.0, 4.0, 3.0],
                &[9, 9, 5],
                &[false, false, true],
            )
            .unwrap()
            .with_position_dims(2)
            .unwrap(),
        );
        let f = signed_distance_fn(&g, |x| x[0] < 2.0);
        let fiber = g.fiber_len();
        for chunk in f.values().chunks(fiber) {
            assert!(chunk.iter().all(|v| *v == chunk[0]));
        }
    }
}
