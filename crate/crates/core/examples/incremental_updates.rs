//! One map expansion handled three ways: full recompute, warm start and
//! local propagation. Prints timings and how each safe set compares with the
//! full one.

use std::f64::consts::PI;
use std::sync::Arc;

use safenav::brs::{default_epsilon, diff_safe_sets, full_recompute, rebuild, UpdateMethod};
use safenav::dynamics::VehicleModel;
use safenav::env::{implicit_obstacle, sense, Environment, KnownFreeMap, SensorSpec};
use safenav::grid::StateGrid;
use safenav::hji::SolverConfig;

fn main() -> safenav::Result<()> {
    let env = Environment::running_example();
    let model = VehicleModel::dubins3_default();
    let solver = SolverConfig::default();
    let grid = Arc::new(
        StateGrid::new(
            &[0.0, 0.0, -PI],
            &[10.0, 10.0, PI],
            &[61, 61, 31],
            &[false, false, true],
        )?
        .with_position_dims(2)?
        .with_labels(&["px", "py", "phi"])?,
    );
    let eps = default_epsilon(&grid);
    let pos = grid.position_grid();
    let lidar = SensorSpec::lidar();

    let start = [2.0, 2.5, PI / 2.0];
    let mut map = KnownFreeMap::from_disk(pos.clone(), [start[0], start[1]], 1.5);
    map.fuse(&sense(&env, &lidar, &start, &pos).free)?;
    let before =
        full_recompute(&implicit_obstacle(&map, &grid)?, &model, &solver)?.with_epsilon(eps);
    println!(
        "initial map: {} free cells, {} safe states",
        map.known_free().count(),
        before.safe_mask().count()
    );

    // drive a little further and look again
    let later = [3.0, 4.5, 0.0];
    let fresh = map.fuse(&sense(&env, &lidar, &later, &pos).free)?;
    let l = implicit_obstacle(&map, &grid)?;
    let newly_free = fresh.extrude(&grid);
    println!("second scan: {} new free cells\n", fresh.count());

    let full = rebuild(
        UpdateMethod::Full,
        &before.value,
        &l,
        &newly_free,
        &model,
        &solver,
    )?
    .with_epsilon(eps);
    println!(
        "{:<6} {:>9} {:>7} {:>14} {:>7} {:>7}",
        "method", "seconds", "sweeps", "node updates", "over %", "under %"
    );
    for method in UpdateMethod::ALL {
        let snap = match method {
            UpdateMethod::Full => full.clone(),
            m => rebuild(m, &before.value, &l, &newly_free, &model, &solver)?.with_epsilon(eps),
        };
        let (over, under) = diff_safe_sets(&snap, &full)?;
        println!(
            "{:<6} {:>9.3} {:>7} {:>14} {:>7.3} {:>7.3}",
            method.as_str(),
            snap.report.elapsed_seconds,
            snap.report.iterations,
            snap.report.nodes_updated_total,
            over,
            under
        );
    }
    Ok(())
}
