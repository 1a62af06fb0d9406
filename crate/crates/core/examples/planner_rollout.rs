//! The three planners on their own, driving open loop on the map they see at
//! the start. Unknown space counts as free, so they head straight into the
//! hidden obstacle.

use std::f64::consts::PI;

use safenav::dynamics::VehicleModel;
use safenav::env::{sense, Environment, KnownFreeMap, SensorSpec};
use safenav::grid::StateGrid;
use safenav::plan::{rollout, PlannerConfig, PlannerKind, PlannerState};

fn main() -> safenav::Result<()> {
    let env = Environment::running_example();
    let model = VehicleModel::dubins3_default();
    let pos = StateGrid::new(&[0.0, 0.0], &[10.0, 10.0], &[81, 81], &[false, false])?
        .with_position_dims(2)?;
    let x0 = [2.0, 2.5, PI / 2.0];
    let mut map = KnownFreeMap::from_disk(pos.clone(), [x0[0], x0[1]], 1.5);
    let scan = sense(&env, &SensorSpec::camera(), &x0, &pos);
    map.fuse(&scan.free)?;
    map.record_hits(&scan.hits);

    for kind in [
        PlannerKind::Optimistic,
        PlannerKind::Spline,
        PlannerKind::Rrt,
    ] {
        let mut planner = PlannerState::new(PlannerConfig {
            kind,
            ..PlannerConfig::default()
        });
        let states = rollout(
            &mut planner,
            &model,
            &x0,
            &env.goal,
            &map,
            &env.workspace,
            0.05,
            400,
        );
        let first_hit = states.iter().position(|s| env.in_collision([s[0], s[1]]));
        let last = states.last().unwrap();
        match first_hit {
            Some(k) => println!(
                "{:>10}: collides at t={:.2}s near ({:.2}, {:.2})",
                kind.as_str(),
                k as f64 * 0.05,
                states[k][0],
                states[k][1]
            ),
            None => println!(
                "{:>10}: no collision, ends at ({:.2}, {:.2}) after {:.2}s",
                kind.as_str(),
                last[0],
                last[1],
                (states.len() - 1) as f64 * 0.05
            ),
        }
    }
    Ok(())
}
