//! A planner that drives straight at the obstacle, with and without the
//! least-restrictive filter. The safe set is computed once on the fully
//! known map.

use std::f64::consts::PI;
use std::sync::Arc;

use safenav::brs::{default_epsilon, full_recompute};
use safenav::dynamics::VehicleModel;
use safenav::env::{implicit_obstacle, Environment, KnownFreeMap};
use safenav::grid::StateGrid;
use safenav::hji::SolverConfig;
use safenav::safety::{Mode, SafetyFilter};
use safenav::sim::integrate;

fn main() -> safenav::Result<()> {
    let env = Environment::running_example();
    let model = VehicleModel::dubins3_default();
    let grid = Arc::new(
        StateGrid::new(
            &[0.0, 0.0, -PI],
            &[10.0, 10.0, PI],
            &[61, 61, 31],
            &[false, false, true],
        )?
        .with_position_dims(2)?,
    );
    let map = KnownFreeMap::from_truth(grid.position_grid(), &env);
    let snapshot = full_recompute(
        &implicit_obstacle(&map, &grid)?,
        &model,
        &SolverConfig::default(),
    )?
    .with_epsilon(default_epsilon(&grid));
    println!(
        "safe set: {:.1}% of states, solved in {:.2}s",
        100.0 * snapshot.safe_mask().count() as f64 / grid.len() as f64,
        snapshot.report.elapsed_seconds
    );

    let reckless = [1.0, 0.0];
    let d = model.no_disturbance();
    for filtered in [false, true] {
        let mut filter = SafetyFilter::new(None);
        let mut x = vec![2.0, 2.5, 0.0];
        let mut clearance = f64::INFINITY;
        let mut overrides = 0;
        for _ in 0..200 {
            let u = if filtered {
                let decision = filter.apply(&snapshot, &model, &x, &reckless)?;
                if decision.mode == Mode::Safety {
                    overrides += 1;
                } else {
                    // least restrictive: the planner's control passes untouched
                    assert_eq!(decision.control, reckless);
                }
                decision.control
            } else {
                reckless.to_vec()
            };
            x = integrate(&model, &x, &u, &d, 0.05, 0.01);
            clearance = clearance.min(env.clearance([x[0], x[1]]));
            if clearance <= 0.0 {
                break;
            }
        }
        println!(
            "{:>10}: min clearance {clearance:>6.3}, {overrides} safety overrides, final ({:.2}, {:.2})",
            if filtered { "filtered" } else { "unfiltered" },
            x[0],
            x[1]
        );
    }
    Ok(())
}
