//! Vehicle models with box-bounded control and disturbance, and the
//! closed-form optimizers of the max-min Hamiltonian.
//!
//! Costates and states are plain slices in model state order:
//! `Dubins3 = (px, py, heading)`, `Dubins4 = (px, py, heading, speed)`,
//! `Integrator1D = (x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MAX_DIMS;

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
    pub fn symmetric(r: f64) -> Self {
        Self { lo: -r, hi: r }
    }
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - INPUT_SLACK && v <= self.hi + INPUT_SLACK
    }
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

const INPUT_SLACK: f64 = 1e-12;

/// How the Lax-Friedrichs dissipation coefficients are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DissipationMode {
    /// Bound evaluated at each node's own state.
    #[default]
    Local,
    /// One bound for the whole grid extent.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VehicleModel {
    /// Planar car with speed and turn-rate control and an additive
    /// position-rate disturbance of magnitude at most `disturbance` per axis.
    Dubins3 {
        speed: Interval,
        turn_rate_max: f64,
        disturbance: f64,
    },
    /// Car with acceleration and turn-rate control; speed is a state.
    /// `speed_extent` bounds the speed axis for the global dissipation bound.
    Dubins4 {
        accel_max: f64,
        turn_rate_max: f64,
        #[serde(default)]
        disturbance: f64,
        speed_extent: Interval,
    },
    /// `x' = drift + u`, `|u| <= control_max`. Used for analytic solver checks.
    Integrator1D {
        control_max: f64,
        #[serde(default)]
        drift: f64,
    },
}

impl VehicleModel {
    /// The 3D car with the bounds of the running example.
    pub fn dubins3_default() -> Self {
        VehicleModel::Dubins3 {
            speed: Interval::new(0.1, 1.0),
            turn_rate_max: 1.0,
            disturbance: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            VehicleModel::Dubins3 {
                speed,
                turn_rate_max,
                disturbance,
            } => {
                if !speed.is_valid() || speed.lo <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "Dubins3 speed interval [{}, {}] must be non-empty with a positive lower bound",
                        speed.lo, speed.hi
                    )));
                }
                check_nonneg("turn_rate_max", turn_rate_max)?;
                check_nonneg("disturbance", disturbance)
            }
            VehicleModel::Dubins4 {
                accel_max,
                turn_rate_max,
                disturbance,
                speed_extent,
            } => {
                check_nonneg("accel_max", accel_max)?;
                check_nonneg("turn_rate_max", turn_rate_max)?;
                check_nonneg("disturbance", disturbance)?;
                if !speed_extent.is_valid() {
                    return Err(Error::InvalidModel("empty speed extent".into()));
                }
                Ok(())
            }
            VehicleModel::Integrator1D { control_max, drift } => {
                check_nonneg("control_max", control_max)?;
                if !drift.is_finite() {
                    return Err(Error::InvalidModel("drift must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            VehicleModel::Dubins3 { .. } => 3,
            VehicleModel::Dubins4 { .. } => 4,
            VehicleModel::Integrator1D { .. } => 1,
        }
    }

    pub fn position_dims(&self) -> usize {
        match self {
            VehicleModel::Integrator1D { .. } => 1,
            _ => 2,
        }
    }

    /// Axis of the heading angle, if the model has one.
    pub fn heading_axis(&self) -> Option<usize> {
        match self {
            VehicleModel::Integrator1D { .. } => None,
            _ => Some(2),
        }
    }

    pub fn state_labels(&self) -> &'static [&'static str] {
        match self {
            VehicleModel::Dubins3 { .. } => &["px", "py", "phi"],
            VehicleModel::Dubins4 { .. } => &["px", "py", "phi", "v"],
            VehicleModel::Integrator1D { .. } => &["x"],
        }
    }

    pub fn control_labels(&self) -> &'static [&'static str] {
        match self {
            VehicleModel::Dubins3 { .. } => &["v", "omega"],
            VehicleModel::Dubins4 { .. } => &["a", "omega"],
            VehicleModel::Integrator1D { .. } => &["u"],
        }
    }

    pub fn periodic_axes(&self) -> Vec<bool> {
        match self {
            VehicleModel::Dubins3 { .. } => vec![false, false, true],
            VehicleModel::Dubins4 { .. } => vec![false, false, true, false],
            VehicleModel::Integrator1D { .. } => vec![false],
        }
    }

    pub fn control_bounds(&self) -> Vec<Interval> {
        match *self {
            VehicleModel::Dubins3 {
                speed,
                turn_rate_max,
                ..
            } => vec![speed, Interval::symmetric(turn_rate_max)],
            VehicleModel::Dubins4 {
                accel_max,
                turn_rate_max,
                ..
            } => vec![
                Interval::symmetric(accel_max),
                Interval::symmetric(turn_rate_max),
            ],
            VehicleModel::Integrator1D { control_max, .. } => {
                vec![Interval::symmetric(control_max)]
            }
        }
    }

    pub fn disturbance_bounds(&self) -> Vec<Interval> {
        match *self {
            VehicleModel::Dubins3 { disturbance, .. }
            | VehicleModel::Dubins4 { disturbance, .. } => {
                vec![Interval::symmetric(disturbance); 2]
            }
            VehicleModel::Integrator1D { .. } => Vec::new(),
        }
    }

    /// Zero disturbance of the right arity.
    pub fn no_disturbance(&self) -> Vec<f64> {
        vec![0.0; self.disturbance_bounds().len()]
    }

    /// Clamps every control channel into its interval.
    pub fn clamp_control(&self, u: &mut [f64]) {
        for (v, b) in u.iter_mut().zip(self.control_bounds()) {
            *v = b.clamp(*v);
        }
    }

    /// State derivative `f(x, u, d)`, rejecting inputs outside their boxes.
    pub fn flow(&self, x: &[f64], u: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        check_inputs("control", u, &self.control_bounds())?;
        check_inputs("disturbance", d, &self.disturbance_bounds())?;
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for a {}-state model",
                x.len(),
                self.state_dim()
            )));
        }
        let mut out = vec![0.0; self.state_dim()];
        self.flow_into(x, u, d, &mut out);
        Ok(out)
    }

    /// [`VehicleModel::flow`] without bound checks.
    pub fn flow_into(&self, x: &[f64], u: &[f64], d: &[f64], out: &mut [f64]) {
        match self {
            VehicleModel::Dubins3 { .. } => {
                let (s, c) = x[2].sin_cos();
                out[0] = u[0] * c + d[0];
                out[1] = u[0] * s + d[1];
                out[2] = u[1];
            }
            VehicleModel::Dubins4 { .. } => {
                let (s, c) = x[2].sin_cos();
                out[0] = x[3] * c + d[0];
                out[1] = x[3] * s + d[1];
                out[2] = u[1];
                out[3] = u[0];
            }
            VehicleModel::Integrator1D { drift, .. } => {
                out[0] = drift + u[0];
            }
        }
    }

    /// Control maximizing `p . f` with the disturbance at its minimizer.
    /// Zero coefficients resolve to the upper bound of the channel.
    pub fn optimal_control(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        match *self {
            VehicleModel::Dubins3 {
                speed,
                turn_rate_max,
                ..
            } => {
                let (s, c) = x[2].sin_cos();
                let v = if p[0] * c + p[1] * s >= 0.0 {
                    speed.hi
                } else {
                    speed.lo
                };
                vec![v, upper_on_tie(p[2], turn_rate_max)]
            }
            VehicleModel::Dubins4 {
                accel_max,
                turn_rate_max,
                ..
            } => vec![
                upper_on_tie(p[3], accel_max),
                upper_on_tie(p[2], turn_rate_max),
            ],
            VehicleModel::Integrator1D { control_max, .. } => vec![upper_on_tie(p[0], control_max)],
        }
    }

    /// Disturbance minimizing `p . f`; zero coefficients resolve to `+d_r`.
    pub fn optimal_disturbance(&self, _x: &[f64], p: &[f64]) -> Vec<f64> {
        match *self {
            VehicleModel::Dubins3 { disturbance, .. }
            | VehicleModel::Dubins4 { disturbance, .. } => {
                vec![oppose(p[0], disturbance), oppose(p[1], disturbance)]
            }
            VehicleModel::Integrator1D { .. } => Vec::new(),
        }
    }

    /// `max_u min_d p . f(x, u, d)`.
    pub fn hamiltonian(&self, x: &[f64], p: &[f64]) -> f64 {
        let trig = match self.heading_axis() {
            Some(axis) => x[axis].sin_cos(),
            None => (0.0, 1.0),
        };
        self.hamiltonian_with_trig(x, trig, p)
    }

    /// Hamiltonian with the heading's `(sin, cos)` supplied by the caller.
    #[inline]
    pub(crate) fn hamiltonian_with_trig(&self, x: &[f64], (s, c): (f64, f64), p: &[f64]) -> f64 {
        match *self {
            VehicleModel::Dubins3 {
                speed,
                turn_rate_max,
                disturbance,
            } => {
                let coef = p[0] * c + p[1] * s;
                let v = if coef >= 0.0 { speed.hi } else { speed.lo };
                v * coef + turn_rate_max * p[2].abs() - disturbance * (p[0].abs() + p[1].abs())
            }
            VehicleModel::Dubins4 {
                accel_max,
                turn_rate_max,
                disturbance,
                ..
            } => {
                x[3] * (p[0] * c + p[1] * s) - disturbance * (p[0].abs() + p[1].abs())
                    + turn_rate_max * p[2].abs()
                    + accel_max * p[3].abs()
            }
            VehicleModel::Integrator1D { control_max, drift } => {
                p[0] * drift + control_max * p[0].abs()
            }
        }
    }

    /// Per-axis bound on `|dH/dp_i|` at state `x`, i.e. `max |f_i(x, u, d)|`.
    pub fn control_jacobian_bounds(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        self.dissipation_into(x, DissipationMode::Local, &mut out);
        out
    }

    /// Bound valid for every state of the model's extent.
    pub fn global_jacobian_bounds(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        let x = [0.0; MAX_DIMS];
        self.dissipation_into(&x[..self.state_dim()], DissipationMode::Global, &mut out);
        out
    }

    #[inline]
    pub(crate) fn dissipation_into(&self, x: &[f64], mode: DissipationMode, out: &mut [f64]) {
        match *self {
            VehicleModel::Dubins3 {
                speed,
                turn_rate_max,
                disturbance,
            } => {
                let planar = speed.lo.abs().max(speed.hi.abs()) + disturbance;
                out[0] = planar;
                out[1] = planar;
                out[2] = turn_rate_max;
            }
            VehicleModel::Dubins4 {
                accel_max,
                turn_rate_max,
                disturbance,
                speed_extent,
            } => {
                let v = match mode {
                    DissipationMode::Local => x[3].abs(),
                    DissipationMode::Global => speed_extent.lo.abs().max(speed_extent.hi.abs()),
                };
                out[0] = v + disturbance;
                out[1] = v + disturbance;
                out[2] = turn_rate_max;
                out[3] = accel_max;
            }
            VehicleModel::Integrator1D { control_max, drift } => out[0] = drift.abs() + control_max,
        }
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "{name} = {v} must be finite and non-negative"
        )))
    }
}

fn check_inputs(kind: &'static str, v: &[f64], bounds: &[Interval]) -> Result<()> {
    if v.len() != bounds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{kind} of length {} for {} channels",
            v.len(),
            bounds.len()
        )));
    }
    for (channel, (&value, b)) in v.iter().zip(bounds).enumerate() {
        if !b.contains(value) {
            return Err(Error::InputOutOfBounds {
                kind,
                channel,
                value,
                lower: b.lo,
                upper: b.hi,
            });
        }
    }
    Ok(())
}

#[inline]
fn upper_on_tie(coef: f64, max: f64) -> f64 {
    if coef >= 0.0 {
        max
    } else {
        -max
    }
}

#[inline]
fn oppose(coef: f64, r: f64) -> f64 {
    if coef > 0.0 {
        -r
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn d4() -> VehicleModel {
        VehicleModel::Dubins4 {
            accel_max: 0.4,
            turn_rate_max: 1.1,
            disturbance: 0.0,
            speed_extent: Interval::new(0.0, 0.7),
        }
    }

    fn assert_vec(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn flow_examples() {
        let m = VehicleModel::dubins3_default();
        assert_vec(
            &m.flow(&[0.0, 0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]).unwrap(),
            &[1.0, 0.0, 0.0],
        );
        assert_vec(
            &m.flow(&[0.0, 0.0, FRAC_PI_2], &[1.0, 1.0], &[0.1, -0.1])
                .unwrap(),
            &[0.1, 0.9, 1.0],
        );
        assert_vec(
            &d4()
                .flow(&[0.0, 0.0, 0.0, 0.5], &[0.4, 1.1], &[0.0, 0.0])
                .unwrap(),
            &[0.5, 0.0, 1.1, 0.4],
        );
    }

    #[test]
    fn flow_rejects_out_of_box_inputs() {
        let m = VehicleModel::dubins3_default();
        assert!(matches!(
            m.flow(&[0.0; 3], &[0.05, 0.0], &[0.0, 0.0]),
            Err(Error::InputOutOfBounds {
                kind: "control",
                channel: 0,
                ..
            })
        ));
        assert!(matches!(
            m.flow(&[0.0; 3], &[0.5, 0.0], &[0.0, 0.2]),
            Err(Error::InputOutOfBounds {
                kind: "disturbance",
                channel: 1,
                ..
            })
        ));
    }

    #[test]
    fn bang_bang_control_examples() {
        let m = VehicleModel::dubins3_default();
        assert_vec(&m.optimal_control(&[0.0; 3], &[1.0, 0.0, 0.0]), &[1.0, 1.0]);
        assert_vec(
            &m.optimal_control(&[0.0; 3], &[-1.0, 0.0, -2.0]),
            &[0.1, -1.0],
        );
        assert_vec(
            &d4().optimal_control(&[0.0; 4], &[0.0, 0.0, 0.0, 1.0]),
            &[0.4, 1.1],
        );
    }

    #[test]
    fn disturbance_examples() {
        let m = VehicleModel::dubins3_default();
        assert_vec(
            &m.optimal_disturbance(&[0.0; 3], &[1.0, -1.0, 0.0]),
            &[-0.1, 0.1],
        );
        assert_vec(
            &m.optimal_disturbance(&[0.0; 3], &[0.0, 0.0, 5.0]),
            &[0.1, 0.1],
        );
        let calm = VehicleModel::Dubins3 {
            speed: Interval::new(0.1, 1.0),
            turn_rate_max: 1.0,
            disturbance: 0.0,
        };
        assert_vec(
            &calm.optimal_disturbance(&[0.0; 3], &[1.0, -1.0, 0.0]),
            &[0.0, 0.0],
        );
    }

    #[test]
    fn hamiltonian_examples() {
        let m = VehicleModel::dubins3_default();
        assert_abs_diff_eq!(
            m.hamiltonian(&[0.0; 3], &[1.0, 0.0, 0.0]),
            0.9,
            epsilon = 1e-12
        );
        assert_eq!(m.hamiltonian(&[0.3, 0.2, 1.0], &[0.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(
            m.hamiltonian(&[0.0; 3], &[0.0, 1.0, 0.0]),
            -0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn jacobian_bound_examples() {
        assert_vec(
            &VehicleModel::dubins3_default().control_jacobian_bounds(&[0.0; 3]),
            &[1.1, 1.1, 1.0],
        );
        let int = VehicleModel::Integrator1D {
            control_max: 1.0,
            drift: 0.0,
        };
        assert_vec(&int.control_jacobian_bounds(&[0.0]), &[1.0]);
        assert_vec(
            &d4().control_jacobian_bounds(&[1.0, 1.0, 0.3, 0.6]),
            &[0.6, 0.6, 1.1, 0.4],
        );
        assert_vec(&d4().global_jacobian_bounds(), &[0.7, 0.7, 1.1, 0.4]);
    }

    #[test]
    fn dubins3_requires_positive_min_speed() {
        let m = VehicleModel::Dubins3 {
            speed: Interval::new(0.0, 1.0),
            turn_rate_max: 1.0,
            disturbance: 0.1,
        };
        assert!(m.validate().is_err());
        assert!(VehicleModel::dubins3_default().validate().is_ok());
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn hamiltonian_is_a_saddle_value(
            phi in -PI..PI,
            p in prop::array::uniform3(-3.0f64..3.0),
            v in 0.1f64..1.0, w in -1.0f64..1.0,
            dx in -0.1f64..0.1, dy in -0.1f64..0.1,
        ) {
            let m = VehicleModel::dubins3_default();
            let x = [1.0, 2.0, phi];
            let h = m.hamiltonian(&x, &p);
            let d_star = m.optimal_disturbance(&x, &p);
            let u_star = m.optimal_control(&x, &p);
            let mut f = [0.0; 3];
            m.flow_into(&x, &[v, w], &d_star, &mut f);
            prop_assert!(h >= dot(&p, &f) - 1e-12);
            m.flow_into(&x, &u_star, &[dx, dy], &mut f);
            prop_assert!(h <= dot(&p, &f) + 1e-12);
            m.flow_into(&x, &u_star, &d_star, &mut f);
            prop_assert!((h - dot(&p, &f)).abs() <= 1e-12);
        }

        #[test]
        fn positive_homogeneity_and_argmax_invariance(
            phi in -PI..PI,
            p in prop::array::uniform4(-3.0f64..3.0),
            speed in 0.0f64..0.7,
            c in 0.01f64..100.0,
        ) {
            let m3 = VehicleModel::dubins3_default();
            let x3 = [0.0, 0.0, phi];
            let p3 = [p[0], p[1], p[2]];
            let scaled3: Vec<f64> = p3.iter().map(|v| v * c).collect();
            let h = m3.hamiltonian(&x3, &p3);
            prop_assert!((m3.hamiltonian(&x3, &scaled3) - c * h).abs() <= 1e-9 * (1.0 + c * h.abs()));
            prop_assert_eq!(m3.optimal_control(&x3, &p3), m3.optimal_control(&x3, &scaled3));

            let m4 = d4();
            let x4 = [0.0, 0.0, phi, speed];
            let scaled4: Vec<f64> = p.iter().map(|v| v * c).collect();
            let h4 = m4.hamiltonian(&x4, &p);
            prop_assert!((m4.hamiltonian(&x4, &scaled4) - c * h4).abs() <= 1e-9 * (1.0 + c * h4.abs()));
            prop_assert_eq!(m4.optimal_control(&x4, &p), m4.optimal_control(&x4, &scaled4));
        }
    }
}
