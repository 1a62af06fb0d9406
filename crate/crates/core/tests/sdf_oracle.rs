use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safenav::grid::{NodeMask, StateGrid};
use safenav::sdf::{position_signed_distance, signed_distance_with, SdfMethod};

fn plane(n: usize) -> StateGrid {
    StateGrid::new(&[0.0, 0.0], &[10.0, 10.0], &[n, n], &[false, false])
        .unwrap()
        .with_position_dims(2)
        .unwrap()
}

/// Random union of rectangles and disks, sampled at node centers.
fn layout(grid: &StateGrid, rng: &mut ChaCha8Rng) -> NodeMask {
    let shapes: Vec<(bool, [f64; 4])> = (0..rng.gen_range(1..6))
        .map(|_| {
            let disk = rng.gen_bool(0.5);
            let a = [
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.3..3.0),
                rng.gen_range(0.3..3.0),
            ];
            (disk, a)
        })
        .collect();
    NodeMask::from_bits(
        (0..grid.len())
            .map(|i| {
                let s = grid.state_of_linear(i);
                shapes.iter().any(|(disk, a)| {
                    if *disk {
                        (s[0] - a[0]).hypot(s[1] - a[1]) <= a[2]
                    } else {
                        (s[0] - a[0]).abs() <= a[2] && (s[1] - a[1]).abs() <= a[3]
                    }
                })
            })
            .collect(),
    )
}

/// Distance from each node to the nearest node of the other membership.
fn brute(grid: &StateGrid, inside: &NodeMask) -> Vec<f64> {
    let pts: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.state_of_linear(i)).collect();
    (0..grid.len())
        .map(|i| {
            let d = (0..grid.len())
                .filter(|&j| inside.contains(j) != inside.contains(i))
                .map(|j| (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]))
                .fold(f64::INFINITY, f64::min);
            if inside.contains(i) {
                d
            } else {
                -d
            }
        })
        .collect()
}

#[test]
fn random_layouts_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = plane(41);
    let diag = grid.position_cell_diagonal();
    let mut mixed = 0;
    for _ in 0..20 {
        let inside = layout(&grid, &mut rng);
        if inside.none() || inside.count() == inside.len() {
            continue;
        }
        mixed += 1;
        let oracle = brute(&grid, &inside);
        for method in [SdfMethod::BruteForce, SdfMethod::DistanceTransform] {
            let got = position_signed_distance(&grid, &inside, method);
            for (i, (g, o)) in got.iter().zip(&oracle).enumerate() {
                assert_eq!(*g > 0.0, inside.contains(i), "{method:?} sign at {i}");
                assert!((g - o).abs() <= diag, "{method:?} node {i}: {g} vs {o}");
            }
        }
    }
    assert!(mixed >= 15);
}

#[test]
fn methods_agree_closely() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = plane(61);
    let h = grid.spacing()[0];
    for _ in 0..5 {
        let inside = layout(&grid, &mut rng);
        let a = position_signed_distance(&grid, &inside, SdfMethod::BruteForce);
        let b = position_signed_distance(&grid, &inside, SdfMethod::DistanceTransform);
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= h, "{worst}");
    }
}

#[test]
fn extrusion_repeats_along_heading() {
    let full = Arc::new(
        StateGrid::new(
            &[0.0, 0.0, -3.0],
            &[10.0, 10.0, 3.0],
            &[21, 21, 5],
            &[false, false, true],
        )
        .unwrap()
        .with_position_dims(2)
        .unwrap(),
    );
    let pos = full.position_grid();
    let inside = layout(&pos, &mut ChaCha8Rng::seed_from_u64(3));
    let flat = position_signed_distance(&pos, &inside, SdfMethod::Auto);
    let field = signed_distance_with(&full, &inside, SdfMethod::Auto);
    for i in 0..full.len() {
        assert_eq!(field.values()[i], flat[full.position_index_of(i)]);
    }
}
