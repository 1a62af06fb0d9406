//! Static SVG figures: a trajectory over the obstacle map and a value slice
//! with its zero and epsilon contours.

use std::fmt::Write as _;

use crate::env::{Environment, KnownFreeMap, Obstacle, Point, Rect};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, StateGrid};
use crate::safety::Mode;
use crate::sim::Trajectory;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// World-to-pixel map with y pointing up in the world.
struct Frame {
    ws: Rect,
    scale: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(ws: Rect) -> Self {
        let scale = (SIZE - 2.0 * MARGIN) / ws.width().max(ws.height());
        Self {
            ws,
            scale,
            width: ws.width() * scale + 2.0 * MARGIN,
            height: ws.height() * scale + 2.0 * MARGIN,
        }
    }

    fn px(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.ws.min[0]) * self.scale,
            MARGIN + (self.ws.max[1] - p[1]) * self.scale,
        )
    }

    fn open(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.1} {:.1}">"#,
            self.width, self.height, self.width, self.height
        );
        let _ = writeln!(s, "<title>{}</title>", escape(title));
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        s
    }

    fn rect(&self, s: &mut String, min: Point, max: Point, style: &str) {
        let (x0, y1) = self.px(min);
        let (x1, y0) = self.px(max);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    fn circle(&self, s: &mut String, c: Point, r_world: f64, style: &str) {
        let (x, y) = self.px(c);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" {style}/>"#,
            r_world * self.scale
        );
    }

    fn obstacles(&self, s: &mut String, env: &Environment) {
        for o in &env.obstacles {
            match *o {
                Obstacle::Rect { min, max } => {
                    self.rect(s, min, max, r##"fill="#555" fill-opacity="0.85""##)
                }
                Obstacle::Circle { center, radius } => {
                    self.circle(s, center, radius, r##"fill="#555" fill-opacity="0.85""##)
                }
            }
        }
        self.rect(
            s,
            self.ws.min,
            self.ws.max,
            r#"fill="none" stroke="black" stroke-width="1.5""#,
        );
        self.circle(
            s,
            env.goal.position,
            env.goal.radius,
            r##"fill="#2a2" fill-opacity="0.6""##,
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Trajectory over the true obstacles and, when given, the known-free cells.
/// Samples taken in safety mode are drawn as red dots.
pub fn trajectory_svg(
    env: &Environment,
    map: Option<&KnownFreeMap>,
    traj: &Trajectory,
    title: &str,
) -> String {
    let f = Frame::new(env.workspace);
    let mut s = f.open(title);
    if let Some(map) = map {
        let g = map.grid();
        let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
        for i in map.known_free().iter() {
            let c = g.state_of_linear(i);
            f.rect(
                &mut s,
                [c[0] - hx / 2.0, c[1] - hy / 2.0],
                [c[0] + hx / 2.0, c[1] + hy / 2.0],
                r##"fill="#cde" stroke="none" shape-rendering="crispEdges""##,
            );
        }
    }
    f.obstacles(&mut s, env);

    let mut path = String::new();
    let points = traj
        .samples
        .iter()
        .map(|p| [p.state[0], p.state[1]])
        .chain(std::iter::once([traj.final_state[0], traj.final_state[1]]));
    for (k, p) in points.enumerate() {
        let (x, y) = f.px(p);
        let _ = write!(path, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
    }
    let _ = writeln!(
        s,
        r##"<path d="{}" fill="none" stroke="#14c" stroke-width="2"/>"##,
        path.trim_end()
    );
    for p in traj.samples.iter().filter(|p| p.mode == Mode::Safety) {
        let (x, y) = f.px([p.state[0], p.state[1]]);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="red"/>"#);
    }
    if let Some(first) = traj.samples.first() {
        f.circle(
            &mut s,
            [first.state[0], first.state[1]],
            0.12,
            r#"fill="black""#,
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="14" font-family="sans-serif" font-size="12">{} at t={:.2}s, min clearance {:.3}, {} safety steps</text>"#,
        traj.outcome,
        traj.final_time,
        traj.min_obstacle_distance,
        traj.safety_steps()
    );
    s.push_str("</svg>\n");
    s
}

/// Fixed values for every non-position axis, keyed by axis index.
pub type SliceSpec = Vec<(usize, f64)>;

/// Parses `"phi=1.57"` or `"phi=1.57,v=0.5"` against the grid's axis labels.
/// Every non-position axis must be fixed exactly once and lie inside the grid.
pub fn parse_slice(spec: &str, grid: &StateGrid) -> Result<SliceSpec> {
    let mut out: SliceSpec = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "slice entry '{part}' is not of the form label=value"
            ))
        })?;
        let name = name.trim();
        let axis = grid
            .axis_of(name)
            .ok_or_else(|| Error::InvalidConfig(format!("grid has no axis named '{name}'")))?;
        if axis < grid.position_dims() {
            return Err(Error::InvalidConfig(format!(
                "'{name}' is a position axis and cannot be fixed"
            )));
        }
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("slice value '{}' is not a number", value.trim()))
        })?;
        let (lo, hi) = (grid.lower()[axis], grid.upper()[axis]);
        if !(value >= lo && value <= hi) {
            return Err(Error::OutOfBounds {
                axis,
                value,
                lower: lo,
                upper: hi,
            });
        }
        if out.iter().any(|&(a, _)| a == axis) {
            return Err(Error::InvalidConfig(format!("axis '{name}' fixed twice")));
        }
        out.push((axis, value));
    }
    for axis in grid.position_dims()..grid.ndim() {
        if !out.iter().any(|&(a, _)| a == axis) {
            return Err(Error::InvalidConfig(format!(
                "slice does not fix axis '{}'",
                grid.labels()[axis]
            )));
        }
    }
    Ok(out)
}

/// Values of `field` on the position nodes with the other axes held at
/// `slice`, indexed `[ix * ny + iy]`.
pub fn value_slice(field: &ScalarField, slice: &[(usize, f64)]) -> Result<Vec<f64>> {
    let g = field.grid();
    let (nx, ny) = (g.counts()[0], g.counts()[1]);
    let mut x = vec![0.0; g.ndim()];
    for &(axis, v) in slice {
        x[axis] = v;
    }
    let mut out = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            x[0] = g.coord(0, ix);
            x[1] = g.coord(1, iy);
            out.push(field.interpolate(&x)?);
        }
    }
    Ok(out)
}

/// Line segments of the `level` contour of a node-sampled planar field
/// (`values[ix * ys.len() + iy]`), by marching squares with linear
/// interpolation along cell edges.
pub fn contour_segments(values: &[f64], xs: &[f64], ys: &[f64], level: f64) -> Vec<[Point; 2]> {
    let ny = ys.len();
    let at = |ix: usize, iy: usize| values[ix * ny + iy] - level;
    let mut segs = Vec::new();
    for ix in 0..xs.len().saturating_sub(1) {
        for iy in 0..ny.saturating_sub(1) {
            // corners counter-clockwise from lower-left
            let corners = [
                ([xs[ix], ys[iy]], at(ix, iy)),
                ([xs[ix + 1], ys[iy]], at(ix + 1, iy)),
                ([xs[ix + 1], ys[iy + 1]], at(ix + 1, iy + 1)),
                ([xs[ix], ys[iy + 1]], at(ix, iy + 1)),
            ];
            let mut crossings: Vec<Point> = Vec::with_capacity(4);
            for k in 0..4 {
                let (pa, va) = corners[k];
                let (pb, vb) = corners[(k + 1) % 4];
                if (va > 0.0) != (vb > 0.0) {
                    let t = va / (va - vb);
                    crossings.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                }
            }
            match crossings.len() {
                2 => segs.push([crossings[0], crossings[1]]),
                4 => {
                    // saddle: pair edges by the sign of the cell center
                    let center: f64 = corners.iter().map(|c| c.1).sum::<f64>() / 4.0;
                    if (center > 0.0) == (corners[0].1 > 0.0) {
                        segs.push([crossings[0], crossings[3]]);
                        segs.push([crossings[1], crossings[2]]);
                    } else {
                        segs.push([crossings[0], crossings[1]]);
                        segs.push([crossings[2], crossings[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

/// Rendered value slice.
#[derive(Debug, Clone)]
pub struct SliceImage {
    pub svg: String,
    /// Position nodes with value above epsilon.
    pub safe_nodes: usize,
    pub epsilon_segments: usize,
    pub zero_segments: usize,
}

/// Safe nodes of the slice shaded green, the epsilon contour in red and the
/// zero contour dashed. Obstacles are drawn when `env` is given.
pub fn slice_svg(
    field: &ScalarField,
    slice: &[(usize, f64)],
    epsilon: f64,
    env: Option<&Environment>,
    title: &str,
) -> Result<SliceImage> {
    let g = field.grid();
    if g.position_dims() != 2 {
        return Err(Error::DimensionMismatch(
            "slice plots need two position axes".into(),
        ));
    }
    let values = value_slice(field, slice)?;
    let xs = g.axis_coords(0);
    let ys = g.axis_coords(1);
    let ws = Rect::new([g.lower()[0], g.lower()[1]], [g.upper()[0], g.upper()[1]]);
    let f = Frame::new(ws);
    let mut s = f.open(title);
    let (hx, hy) = (g.spacing()[0], g.spacing()[1]);
    let mut safe_nodes = 0;
    for (ix, &x) in xs.iter().enumerate() {
        for (iy, &y) in ys.iter().enumerate() {
            if values[ix * ys.len() + iy] > epsilon {
                safe_nodes += 1;
                let lo = [(x - hx / 2.0).max(ws.min[0]), (y - hy / 2.0).max(ws.min[1])];
                let hi = [(x + hx / 2.0).min(ws.max[0]), (y + hy / 2.0).min(ws.max[1])];
                f.rect(
                    &mut s,
                    lo,
                    hi,
                    r##"fill="#9d9" stroke="none" shape-rendering="crispEdges""##,
                );
            }
        }
    }
    if let Some(env) = env {
        f.obstacles(&mut s, env);
    } else {
        f.rect(
            &mut s,
            ws.min,
            ws.max,
            r#"fill="none" stroke="black" stroke-width="1.5""#,
        );
    }
    let mut draw = |segs: &[[Point; 2]], style: &str| {
        for [a, b] in segs {
            let (x0, y0) = f.px(*a);
            let (x1, y1) = f.px(*b);
            let _ = writeln!(
                s,
                r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" {style}/>"#
            );
        }
    };
    let zero = contour_segments(&values, &xs, &ys, 0.0);
    let eps = contour_segments(&values, &xs, &ys, epsilon);
    draw(
        &zero,
        r#"stroke="black" stroke-width="1" stroke-dasharray="4 3""#,
    );
    draw(&eps, r#"stroke="red" stroke-width="2""#);
    let fixed: Vec<String> = slice
        .iter()
        .map(|&(a, v)| format!("{}={v:.3}", g.labels()[a]))
        .collect();
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="14" font-family="sans-serif" font-size="12">{} epsilon={epsilon:.3}, {safe_nodes} safe nodes</text>"#,
        escape(&fixed.join(", "))
    );
    s.push_str("</svg>\n");
    Ok(SliceImage {
        svg: s,
        safe_nodes,
        epsilon_segments: eps.len(),
        zero_segments: zero.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid3() -> Arc<StateGrid> {
        Arc::new(
            StateGrid::new(
                &[0.0, 0.0, -PI],
                &[4.0, 4.0, PI],
                &[21, 21, 8],
                &[false, false, true],
            )
            .unwrap()
            .with_position_dims(2)
            .unwrap()
            .with_labels(&["x", "y", "phi"])
            .unwrap(),
        )
    }

    #[test]
    fn slice_spec_parsing() {
        let g = grid3();
        assert_eq!(parse_slice("phi=1.57", &g).unwrap(), vec![(2, 1.57)]);
        assert!(parse_slice("", &g).is_err());
        assert!(parse_slice("theta=1", &g).is_err());
        assert!(parse_slice("x=1", &g).is_err());
        assert!(matches!(
            parse_slice("phi=7", &g),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(parse_slice("phi=abc", &g).is_err());
    }

    #[test]
    fn circle_contour_is_closed_and_near_radius() {
        let g = grid3();
        let field = ScalarField::from_fn(g.clone(), |x| (x[0] - 2.0).hypot(x[1] - 2.0) - 1.0);
        let values = value_slice(&field, &[(2, 0.3)]).unwrap();
        let segs = contour_segments(&values, &g.axis_coords(0), &g.axis_coords(1), 0.0);
        assert!(segs.len() > 8);
        for s in &segs {
            for p in s {
                let r = (p[0] - 2.0).hypot(p[1] - 2.0);
                assert!((r - 1.0).abs() < 0.05, "{r}");
            }
        }
        // closed curve: every endpoint is shared by exactly two segments
        let mut ends: Vec<Point> = segs.iter().flat_map(|s| s.iter().copied()).collect();
        ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in ends.chunks(2) {
            assert!(
                (pair[0][0] - pair[1][0]).abs() < 1e-9 && (pair[0][1] - pair[1][1]).abs() < 1e-9
            );
        }
    }

    #[test]
    fn constant_positive_field_is_all_safe() {
        let g = grid3();
        let field = ScalarField::constant(g.clone(), 1.0);
        let img = slice_svg(&field, &[(2, 0.0)], 0.2, None, "const").unwrap();
        assert_eq!(img.safe_nodes, 21 * 21);
        assert_eq!(img.epsilon_segments, 0);
        assert!(img.svg.starts_with("<svg"));
    }
}
