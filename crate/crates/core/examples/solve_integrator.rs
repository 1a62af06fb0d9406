//! Solves the 1D avoid problem `x' = u, |u| <= 1`, `l(x) = x` and compares
//! the converged value with the exact answer `V = l`, then shows the error
//! of a drifting variant shrinking under grid refinement.

use std::sync::Arc;

use safenav::dynamics::VehicleModel;
use safenav::grid::{ScalarField, StateGrid};
use safenav::hji::{solve, solve_horizon, SolverConfig};

fn line(n: usize) -> Arc<StateGrid> {
    Arc::new(StateGrid::new(&[-2.0], &[2.0], &[n], &[false]).unwrap())
}

fn main() -> safenav::Result<()> {
    // plain scheme, no pinning of l <= 0 nodes
    let cfg = SolverConfig {
        pin_unsafe: false,
        ..SolverConfig::default()
    };
    let controlled = VehicleModel::Integrator1D {
        control_max: 1.0,
        drift: 0.0,
    };
    let g = line(81);
    let l = ScalarField::from_fn(g.clone(), |x| x[0]);
    let (v, report) = solve(&l, &l, &controlled, &cfg)?;
    let err = v
        .values()
        .iter()
        .zip(l.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "controlled: {} sweeps, max |V - l| = {err:.2e} (cell = {:.3})",
        report.iterations,
        g.spacing()[0]
    );

    // drift -1 and no control: V(x, T) = min over s in [0, T] of l(x - s),
    // evaluated here by brute force over s
    let drifting = VehicleModel::Integrator1D {
        control_max: 0.0,
        drift: -1.0,
    };
    let bumpy = |x: f64| (2.0 * x).sin();
    let horizon = 0.5;
    let exact = |x: f64| {
        (0..=2000)
            .map(|k| bumpy(x - horizon * k as f64 / 2000.0))
            .fold(f64::INFINITY, f64::min)
    };
    let mut previous = None;
    for n in [41, 81, 161] {
        let g = line(n);
        let l = ScalarField::from_fn(g.clone(), |x| bumpy(x[0]));
        let v = solve_horizon(&l, &l, &drifting, &cfg, horizon)?;
        let err = g
            .axis_coords(0)
            .iter()
            .zip(v.values())
            .filter(|(x, _)| **x > -2.0 + horizon + 0.2)
            .map(|(x, v)| (v - exact(*x)).abs())
            .fold(0.0, f64::max);
        match previous {
            Some(p) => println!(
                "drift, {n:>3} nodes: max error {err:.3e}, ratio {:.2}",
                err / p
            ),
            None => println!("drift, {n:>3} nodes: max error {err:.3e}"),
        }
        previous = Some(err);
    }
    Ok(())
}
