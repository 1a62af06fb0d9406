//! Saves a snapshot, reads it back and renders heading slices of its safe set.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use safenav::brs::{default_epsilon, full_recompute, SafeSetSnapshot};
use safenav::dynamics::VehicleModel;
use safenav::env::{implicit_obstacle, Environment, KnownFreeMap};
use safenav::grid::StateGrid;
use safenav::hji::SolverConfig;
use safenav::plot::{parse_slice, slice_svg};

fn main() -> safenav::Result<()> {
    let env = Environment::running_example();
    let grid = Arc::new(
        StateGrid::new(
            &[0.0, 0.0, -PI],
            &[10.0, 10.0, PI],
            &[41, 41, 21],
            &[false, false, true],
        )?
        .with_position_dims(2)?
        .with_labels(&["px", "py", "phi"])?,
    );
    let map = KnownFreeMap::from_truth(grid.position_grid(), &env);
    let snap = full_recompute(
        &implicit_obstacle(&map, &grid)?,
        &VehicleModel::dubins3_default(),
        &SolverConfig::default(),
    )?
    .with_epsilon(default_epsilon(&grid));

    let out = PathBuf::from(std::env::var("SAFENAV_OUT_DIR").unwrap_or_else(|_| "out".into()))
        .join("inspect");
    let field = snap.save(&out, "truth")?;
    let loaded = SafeSetSnapshot::load(&field)?;
    assert_eq!(loaded.value, snap.value);
    println!("saved and reloaded {}", field.display());

    for spec in ["phi=0", "phi=1.5708", "phi=-1.5708", "phi=3.1"] {
        let slice = parse_slice(spec, loaded.grid())?;
        let img = slice_svg(&loaded.value, &slice, loaded.epsilon, Some(&env), spec)?;
        let path = out.join(format!("slice_{}.svg", spec.replace('=', "_")));
        std::fs::write(&path, img.svg)?;
        println!(
            "{spec:<12} {:>4} safe cells, {:>3} contour segments -> {}",
            img.safe_nodes,
            img.epsilon_segments,
            path.display()
        );
    }
    for bad in ["phi=4", "theta=0", ""] {
        println!(
            "{bad:<12} rejected: {}",
            parse_slice(bad, loaded.grid()).unwrap_err()
        );
    }
    Ok(())
}
