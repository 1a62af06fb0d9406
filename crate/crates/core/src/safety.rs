//! Least-restrictive safety filter.
//!
//! The planner's control passes through unchanged while the state's value
//! exceeds the snapshot's epsilon; at or below it the control that maximizes
//! the worst-case rate of change of the value takes over.

use std::fmt;
use std::io::Write;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::brs::SafeSetSnapshot;
use crate::dynamics::VehicleModel;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Planner,
    Safety,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Planner => "planner",
            Mode::Safety => "safety",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub mode: Mode,
    pub control: Vec<f64>,
    /// Interpolated value at the state; `-inf` when the state is off the grid.
    pub value_at_state: f64,
    pub snapshot_time: f64,
    /// The value gradient vanished and the tie-broken control was used.
    pub plateau: bool,
    pub off_grid: bool,
}

/// Control maximizing the worst-case value rate at `x`, and whether the
/// gradient there was zero.
pub fn safe_control(
    snapshot: &SafeSetSnapshot,
    model: &VehicleModel,
    x: &[f64],
) -> Result<(Vec<f64>, bool)> {
    let grad = snapshot.value.gradient_at(x)?;
    let plateau = grad.iter().all(|g| *g == 0.0);
    Ok((model.optimal_control(x, &grad), plateau))
}

/// One application of the filter without hysteresis.
pub fn filter(
    snapshot: &SafeSetSnapshot,
    model: &VehicleModel,
    x: &[f64],
    u_plan: &[f64],
) -> Result<FilterDecision> {
    SafetyFilter::default().apply(snapshot, model, x, u_plan)
}

/// Filter with optional hysteresis: once in safety mode it stays there until
/// the value exceeds `epsilon * (1 + margin)`.
#[derive(Debug, Clone, Default)]
pub struct SafetyFilter {
    pub hysteresis: Option<f64>,
    engaged: bool,
}

impl SafetyFilter {
    pub fn new(hysteresis: Option<f64>) -> Self {
        Self {
            hysteresis,
            engaged: false,
        }
    }

    pub fn apply(
        &mut self,
        snapshot: &SafeSetSnapshot,
        model: &VehicleModel,
        x: &[f64],
        u_plan: &[f64],
    ) -> Result<FilterDecision> {
        let grid = snapshot.grid();
        if !grid.contains(x) {
            // no value off the grid: steer the position back toward the middle
            let n = grid.ndim();
            let mut p = vec![0.0; n];
            for (a, slot) in p.iter_mut().enumerate().take(grid.position_dims()) {
                *slot = 0.5 * (grid.lower()[a] + grid.upper()[a]) - x[a];
            }
            self.engaged = true;
            return Ok(FilterDecision {
                mode: Mode::Safety,
                control: model.optimal_control(x, &p),
                value_at_state: f64::NEG_INFINITY,
                snapshot_time: snapshot.computed_at,
                plateau: false,
                off_grid: true,
            });
        }
        let value = snapshot.value_at(x)?;
        let mut threshold = snapshot.epsilon;
        if let (Some(margin), true) = (self.hysteresis, self.engaged) {
            threshold = snapshot.epsilon * (1.0 + margin);
        }
        if value > threshold {
            self.engaged = false;
            return Ok(FilterDecision {
                mode: Mode::Planner,
                control: u_plan.to_vec(),
                value_at_state: value,
                snapshot_time: snapshot.computed_at,
                plateau: false,
                off_grid: false,
            });
        }
        self.engaged = true;
        let (control, plateau) = safe_control(snapshot, model, x)?;
        if plateau {
            log::debug!("value plateau at {x:?}; using tie-broken safe control");
        }
        Ok(FilterDecision {
            mode: Mode::Safety,
            control,
            value_at_state: value,
            snapshot_time: snapshot.computed_at,
            plateau,
            off_grid: false,
        })
    }
}

/// The active snapshot, swappable while readers hold the previous one.
#[derive(Debug)]
pub struct SharedSnapshot {
    inner: RwLock<Arc<SafeSetSnapshot>>,
}

impl SharedSnapshot {
    pub fn new(snapshot: SafeSetSnapshot) -> Self {
        Self {
            inner: RwLock::new(Arc::new(snapshot)),
        }
    }

    pub fn current(&self) -> Arc<SafeSetSnapshot> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, snapshot: SafeSetSnapshot) -> Arc<SafeSetSnapshot> {
        let mut guard = self.inner.write().unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *guard, Arc::new(snapshot))
    }
}

/// One row of the decision log.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub planner_control: Vec<f64>,
    pub decision: FilterDecision,
}

/// Writes the decision log as CSV with one row per control step.
pub fn write_decision_log(
    w: impl Write,
    state_labels: &[&str],
    control_labels: &[&str],
    records: &[DecisionRecord],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(state_labels.iter().map(|s| s.to_string()));
    header.push("mode".into());
    header.extend(control_labels.iter().map(|s| format!("u_{s}")));
    header.extend(control_labels.iter().map(|s| format!("plan_{s}")));
    header.extend(["value", "snapshot_time", "plateau", "off_grid"].map(String::from));
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![r.t.to_string()];
        row.extend(r.state.iter().map(|v| v.to_string()));
        row.push(r.decision.mode.to_string());
        row.extend(r.decision.control.iter().map(|v| v.to_string()));
        row.extend(r.planner_control.iter().map(|v| v.to_string()));
        row.push(r.decision.value_at_state.to_string());
        row.push(r.decision.snapshot_time.to_string());
        row.push(r.decision.plateau.to_string());
        row.push(r.decision.off_grid.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brs::UpdateMethod;
    use crate::grid::{ScalarField, StateGrid};
    use crate::hji::SolveReport;
    use std::f64::consts::PI;

    fn snapshot(f: impl FnMut(&[f64]) -> f64, epsilon: f64) -> SafeSetSnapshot {
        let g = Arc::new(
            StateGrid::new(
                &[0.0, 0.0, -PI],
                &[4.0, 4.0, PI],
                &[21, 21, 16],
                &[false, false, true],
            )
            .unwrap()
            .with_position_dims(2)
            .unwrap(),
        );
        let field = ScalarField::from_fn(g, f);
        SafeSetSnapshot::new(field, UpdateMethod::Full, SolveReport::default())
            .with_epsilon(epsilon)
            .with_time(2.0)
    }

    #[test]
    fn passthrough_above_epsilon() {
        let m = VehicleModel::dubins3_default();
        let snap = snapshot(|_| 2.0, 0.05);
        let d = filter(&snap, &m, &[2.0, 2.0, 0.0], &[0.4, -0.3]).unwrap();
        assert_eq!(d.mode, Mode::Planner);
        assert_eq!(d.control, vec![0.4, -0.3]);
        assert_eq!(d.snapshot_time, 2.0);
    }

    #[test]
    fn safety_at_or_below_epsilon() {
        let m = VehicleModel::dubins3_default();
        let snap = snapshot(|x| x[0] - 1.99, 0.05);
        let d = filter(&snap, &m, &[2.0, 2.0, 0.0], &[0.4, -0.3]).unwrap();
        assert_eq!(d.mode, Mode::Safety);
        assert_eq!(
            d.control,
            safe_control(&snap, &m, &[2.0, 2.0, 0.0]).unwrap().0
        );
    }

    #[test]
    fn safe_control_follows_the_gradient() {
        let m = VehicleModel::dubins3_default();
        let snap = snapshot(|x| x[0], 0.05);
        let (u, plateau) = safe_control(&snap, &m, &[2.0, 2.0, 0.0]).unwrap();
        assert!(!plateau);
        assert_eq!(u[0], 1.0);
        let (u, _) = safe_control(&snap, &m, &[2.0, 2.0, PI - 1e-9]).unwrap();
        assert_eq!(u[0], 0.1);

        let flat = snapshot(|_| 0.0, 0.05);
        let (u, plateau) = safe_control(&flat, &m, &[2.0, 2.0, 0.0]).unwrap();
        assert!(plateau);
        assert_eq!(u, vec![1.0, 1.0]);
    }

    #[test]
    fn off_grid_states_engage_safety() {
        let m = VehicleModel::dubins3_default();
        let snap = snapshot(|_| 2.0, 0.05);
        let d = filter(&snap, &m, &[5.0, 2.0, 0.0], &[0.4, 0.0]).unwrap();
        assert_eq!(d.mode, Mode::Safety);
        assert!(d.off_grid);
        assert_eq!(d.value_at_state, f64::NEG_INFINITY);
    }

    #[test]
    fn hysteresis_holds_safety_mode() {
        let m = VehicleModel::dubins3_default();
        let snap = snapshot(|x| x[0] - 1.5, 0.4);
        let mut f = SafetyFilter::new(Some(0.5));
        assert_eq!(
            f.apply(&snap, &m, &[1.8, 2.0, 0.0], &[1.0, 0.0])
                .unwrap()
                .mode,
            Mode::Safety
        );
        // V = 0.5 > eps but below eps * 1.5
        assert_eq!(
            f.apply(&snap, &m, &[2.0, 2.0, 0.0], &[1.0, 0.0])
                .unwrap()
                .mode,
            Mode::Safety
        );
        assert_eq!(
            f.apply(&snap, &m, &[2.25, 2.0, 0.0], &[1.0, 0.0])
                .unwrap()
                .mode,
            Mode::Planner
        );
        let mut plain = SafetyFilter::default();
        assert_eq!(
            plain
                .apply(&snap, &m, &[1.8, 2.0, 0.0], &[1.0, 0.0])
                .unwrap()
                .mode,
            Mode::Safety
        );
        assert_eq!(
            plain
                .apply(&snap, &m, &[2.0, 2.0, 0.0], &[1.0, 0.0])
                .unwrap()
                .mode,
            Mode::Planner
        );
    }

    #[test]
    fn shared_snapshot_swaps_whole_values() {
        let shared = SharedSnapshot::new(snapshot(|_| 1.0, 0.1));
        let held = shared.current();
        let old = shared.replace(snapshot(|_| 3.0, 0.1));
        assert!(Arc::ptr_eq(&held, &old));
        assert_eq!(shared.current().value.values()[0], 3.0);
        assert_eq!(held.value.values()[0], 1.0);
    }

    #[test]
    fn decision_log_layout() {
        let snap = snapshot(|_| 2.0, 0.05);
        let m = VehicleModel::dubins3_default();
        let d = filter(&snap, &m, &[2.0, 2.0, 0.0], &[0.5, 0.0]).unwrap();
        let rec = DecisionRecord {
            t: 0.05,
            state: vec![2.0, 2.0, 0.0],
            planner_control: vec![0.5, 0.0],
            decision: d,
        };
        let mut buf = Vec::new();
        write_decision_log(&mut buf, m.state_labels(), m.control_labels(), &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,"));
        assert!(header.contains("mode"));
        assert!(lines.next().unwrap().contains(",planner,"));
    }
}
