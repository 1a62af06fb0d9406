//! Builds the implicit surface function of the free space of the running
//! example and compares the exact and the two-pass transforms against the
//! true clearance to the obstacle.

use std::sync::Arc;

use safenav::env::Environment;
use safenav::grid::{NodeMask, StateGrid};
use safenav::sdf::{position_signed_distance, SdfMethod};

fn main() -> safenav::Result<()> {
    let env = Environment::running_example();
    let pos = Arc::new(
        StateGrid::new(&[0.0, 0.0], &[10.0, 10.0], &[61, 61], &[false, false])?
            .with_position_dims(2)?,
    );
    let free = NodeMask::from_bits(
        (0..pos.len())
            .map(|i| {
                let s = pos.state_of_linear(i);
                !env.in_collision([s[0], s[1]])
            })
            .collect(),
    );

    let exact = position_signed_distance(&pos, &free, SdfMethod::BruteForce);
    let fast = position_signed_distance(&pos, &free, SdfMethod::DistanceTransform);
    let agree = exact
        .iter()
        .zip(&fast)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("brute force vs distance transform: max difference {agree:.2e}");

    // away from the workspace walls the field tracks the obstacle clearance
    let mut worst: f64 = 0.0;
    for (i, f) in fast.iter().enumerate() {
        let s = pos.state_of_linear(i);
        let p = [s[0], s[1]];
        let wall = p[0].min(p[1]).min(10.0 - p[0]).min(10.0 - p[1]);
        let obstacle = env.obstacles[0].signed_distance(p);
        if wall > obstacle.abs() + 0.5 {
            worst = worst.max((f - obstacle).abs());
        }
    }
    println!(
        "max |signed distance - clearance| = {worst:.3} (cell diagonal {:.3})",
        pos.position_cell_diagonal()
    );

    // coarse picture, '#' for obstacle, digits for clearance in metres
    for iy in (0..61).step_by(4).rev() {
        let row: String = (0..61)
            .step_by(2)
            .map(|ix| {
                let d = fast[ix * 61 + iy];
                if d < 0.0 {
                    '#'
                } else {
                    char::from_digit(d.min(9.0) as u32, 10).unwrap()
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
