use std::f64::consts::PI;
use std::sync::Arc;

use safenav::brs::{
    default_epsilon, diff_safe_sets, full_recompute, local_update_traced, warm_solve,
    SafeSetSnapshot, UpdateMethod,
};
use safenav::config::ScenarioConfig;
use safenav::dynamics::VehicleModel;
use safenav::env::{implicit_obstacle, KnownFreeMap, SensorSpec};
use safenav::grid::{GridIndex, NodeMask, ScalarField, StateGrid};
use safenav::hji::SolverConfig;
use safenav::sim::{initial_map, run_episode_observed};

fn grid(n: usize) -> Arc<StateGrid> {
    Arc::new(
        StateGrid::new(
            &[0.0, 0.0, -PI],
            &[10.0, 10.0, PI],
            &[n, n, 16],
            &[false, false, true],
        )
        .unwrap()
        .with_position_dims(2)
        .unwrap(),
    )
}

struct Stage {
    l: ScalarField,
    newly_free: NodeMask,
}

/// Known-free map growing from a disk by overlapping disks.
fn growth(g: &Arc<StateGrid>) -> (ScalarField, Vec<Stage>) {
    let pos = g.position_grid();
    let mut map = KnownFreeMap::from_disk(pos.clone(), [3.0, 5.0], 1.8);
    let l0 = implicit_obstacle(&map, g).unwrap();
    let additions = [
        KnownFreeMap::from_disk(pos.clone(), [4.2, 5.0], 1.8),
        KnownFreeMap::from_disk(pos.clone(), [5.6, 5.5], 1.6),
        KnownFreeMap::from_disk(pos.clone(), [6.8, 4.8], 1.8),
    ];
    let stages = additions
        .iter()
        .map(|add| {
            let fresh = map.fuse(add.known_free()).unwrap();
            Stage {
                l: implicit_obstacle(&map, g).unwrap(),
                newly_free: fresh.extrude(g),
            }
        })
        .collect();
    (l0, stages)
}

fn model() -> VehicleModel {
    VehicleModel::dubins3_default()
}

/// `set` and one first-order stencil ring around it.
fn halo(g: &StateGrid, set: &NodeMask) -> NodeMask {
    let mut allowed = NodeMask::empty(g.len());
    for i in 0..g.len() {
        if set.contains(i) {
            allowed.insert(i);
            let c = g.grid_index(i);
            for axis in 0..g.ndim() {
                for off in [-1isize, 1] {
                    if let Some(j) = g.step(axis, c.coords[axis], off) {
                        let mut cc = c.coords.clone();
                        cc[axis] = j;
                        allowed.insert(g.linear_index(&GridIndex::new(cc)));
                    }
                }
            }
        }
    }
    allowed
}

fn snap_eps(s: SafeSetSnapshot, eps: f64) -> SafeSetSnapshot {
    s.with_epsilon(eps)
}

#[test]
fn empty_change_is_a_no_op_for_local() {
    let g = grid(31);
    let cfg = SolverConfig::default();
    let (l0, _) = growth(&g);
    let base = full_recompute(&l0, &model(), &cfg).unwrap();
    let (out, touched) =
        local_update_traced(&base.value, &l0, &NodeMask::empty(g.len()), &model(), &cfg).unwrap();
    assert_eq!(out.report.nodes_updated_total, 0);
    assert_eq!(out.report.iterations, 0);
    assert!(touched.none());
    let same = out
        .value
        .values()
        .iter()
        .zip(base.value.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(same);
}

#[test]
fn incremental_methods_track_full_recompute() {
    let g = grid(41);
    // tight enough that every solve sits at its fixed point to well under 1e-6
    let cfg = SolverConfig {
        convergence_tol: 1e-8,
        ..SolverConfig::default()
    };
    let eps = default_epsilon(&g);
    let (l0, stages) = growth(&g);
    let mut warm_prev = full_recompute(&l0, &model(), &cfg).unwrap().value;
    let mut local_prev = warm_prev.clone();
    let mut full_prev: Option<SafeSetSnapshot> = None;
    for (k, stage) in stages.iter().enumerate() {
        let full = snap_eps(full_recompute(&stage.l, &model(), &cfg).unwrap(), eps);
        let warm = snap_eps(
            warm_solve(&warm_prev, &stage.l, &stage.newly_free, &model(), &cfg).unwrap(),
            eps,
        );
        let (local, touched) =
            local_update_traced(&local_prev, &stage.l, &stage.newly_free, &model(), &cfg).unwrap();
        let local = snap_eps(local, eps);

        // warm never exceeds the full solution
        for (w, f) in warm.value.values().iter().zip(full.value.values()) {
            assert!(*w <= f + 1e-6, "stage {k}: warm {w} above full {f}");
        }
        let (over, under) = diff_safe_sets(&warm, &full).unwrap();
        assert_eq!(under, 0.0, "stage {k}");
        assert!(over < 2.0, "stage {k}: warm over {over}%");

        let (over, under) = diff_safe_sets(&local, &full).unwrap();
        assert_eq!(
            under, 0.0,
            "stage {k}: local labels {under}% unsafe nodes safe"
        );
        assert!(over < 2.0, "stage {k}: local over {over}%");

        let agree = local
            .value
            .values()
            .iter()
            .zip(warm.value.values())
            .filter(|(a, b)| (**a > eps) == (**b > eps))
            .count();
        assert!(
            agree as f64 >= 0.98 * g.len() as f64,
            "stage {k}: agree {agree}"
        );
        assert!(touched.count() < g.len(), "stage {k}");

        // the safe set grows with the known free set
        if let Some(prev) = &full_prev {
            let lost = prev
                .value
                .values()
                .iter()
                .zip(full.value.values())
                .filter(|(a, b)| **a > eps && **b <= eps)
                .count();
            assert_eq!(lost, 0, "stage {k}");
        }

        warm_prev = warm.value.clone();
        local_prev = local.value.clone();
        full_prev = Some(full);
    }
}

#[test]
fn sealed_pocket_stays_local() {
    let g = grid(41);
    let cfg = SolverConfig::default();
    let pos = g.position_grid();
    let mut map = KnownFreeMap::from_disk(pos.clone(), [2.5, 2.5], 1.8);
    let l0 = implicit_obstacle(&map, &g).unwrap();
    let base = full_recompute(&l0, &model(), &cfg).unwrap();

    let pocket = KnownFreeMap::from_disk(pos.clone(), [7.5, 7.5], 0.8);
    let fresh = map.fuse(pocket.known_free()).unwrap();
    let l1 = implicit_obstacle(&map, &g).unwrap();
    let newly_free = fresh.extrude(&g);
    let (out, touched) =
        local_update_traced(&base.value, &l1, &newly_free, &model(), &cfg).unwrap();

    let allowed = halo(&g, &newly_free);
    assert!(!touched.none());
    assert!(touched.is_subset_of(&allowed));

    // the original region is bit-identical
    for i in 0..g.len() {
        let s = g.state_of_linear(i);
        if (s[0] - 2.5).hypot(s[1] - 2.5) < 3.0 {
            assert_eq!(
                out.value.values()[i].to_bits(),
                base.value.values()[i].to_bits()
            );
        }
    }
}

#[test]
fn warm_without_new_space_is_already_converged() {
    let g = grid(31);
    let cfg = SolverConfig::default();
    let (l0, _) = growth(&g);
    let base = full_recompute(&l0, &model(), &cfg).unwrap();
    let again = warm_solve(&base.value, &l0, &NodeMask::empty(g.len()), &model(), &cfg).unwrap();
    assert!(again.report.iterations <= 2);
    assert!(again.report.final_residual <= cfg.convergence_tol);
}

/// Camera rebuilds of a running-example episode at the bundled resolution.
#[test]
fn running_example_camera_steps() {
    let mut s = ScenarioConfig::bundled("running-example").unwrap();
    s.sensor = SensorSpec::camera();
    let g = s.grid().unwrap();
    let eps = default_epsilon(&g);
    let (mut checked, mut wide) = (0, 0);
    let mut steps = Vec::new();
    run_episode_observed(&s.setup(&g), UpdateMethod::Local, &s.episode, &mut |ev| {
        let v_last = &ev.previous.value;
        let warm = warm_solve(v_last, ev.l, ev.newly_free, &s.model, &s.solver)?;
        let (local, touched) =
            local_update_traced(v_last, ev.l, ev.newly_free, &s.model, &s.solver)?;
        let agree = local
            .value
            .values()
            .iter()
            .zip(warm.value.values())
            .filter(|(a, b)| (**a > eps) == (**b > eps))
            .count();
        assert!(
            agree as f64 >= 0.98 * g.len() as f64,
            "t={}: agree {agree} of {}",
            ev.t,
            g.len()
        );
        // the queue starts with the newly freed nodes, so only steps revealing
        // less than a quarter of the grid can stay under a quarter
        let fresh = ev.newly_free.count() as f64 / g.len() as f64;
        let frac = touched.count() as f64 / g.len() as f64;
        steps.push(format!(
            "t={} fresh {:.1}% touched {:.1}%",
            ev.t,
            100.0 * fresh,
            100.0 * frac
        ));
        if fresh < 0.25 {
            checked += 1;
            if frac >= 0.25 {
                wide += 1;
            }
        }
        Ok(())
    })
    .unwrap();
    assert!(checked >= 3, "{steps:?}");
    assert_eq!(wide, 0, "{steps:?}");
}

#[test]
fn fully_revealed_map_matches_full_within_a_cell() {
    let s = ScenarioConfig::bundled("running-example").unwrap();
    let g = s.grid().unwrap();
    let map0 = initial_map(&s.setup(&g), &s.episode).unwrap();
    let l0 = implicit_obstacle(&map0, &g).unwrap();
    let base = full_recompute(&l0, &s.model, &s.solver).unwrap();
    let truth = KnownFreeMap::from_truth(g.position_grid(), &s.environment);
    let mut map = map0.clone();
    let newly_free = map.fuse(truth.known_free()).unwrap().extrude(&g);
    let l1 = implicit_obstacle(&map, &g).unwrap();
    let eps = default_epsilon(&g);
    let full = full_recompute(&l1, &s.model, &s.solver)
        .unwrap()
        .with_epsilon(eps);
    let warm = warm_solve(&base.value, &l1, &newly_free, &s.model, &s.solver)
        .unwrap()
        .with_epsilon(eps);
    let full_safe = full.safe_mask();
    let warm_safe = warm.safe_mask();
    assert!(warm_safe.is_subset_of(&full_safe));
    // nodes only the full set labels safe sit on its boundary
    let mut far = 0;
    for i in full_safe.iter().filter(|&i| !warm_safe.contains(i)) {
        let c = g.grid_index(i);
        let near_boundary = (0..2).any(|axis| {
            [-1isize, 1].iter().any(|&off| {
                g.step(axis, c.coords[axis], off).is_some_and(|j| {
                    let mut cc = c.coords.clone();
                    cc[axis] = j;
                    !full_safe.contains(g.linear_index(&GridIndex::new(cc)))
                })
            })
        });
        if !near_boundary {
            far += 1;
        }
    }
    assert_eq!(far, 0);
}
