use safenav::brs::UpdateMethod;
use safenav::config::{GridSpec, ScenarioConfig};
use safenav::safety::{write_decision_log, Mode};
use safenav::sim::{
    initial_map, run_episode, write_trajectory_csv, DisturbanceMode, Episode, Outcome,
};

fn coarse(name: &str) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::bundled(name).unwrap();
    cfg.grid = GridSpec {
        counts: vec![61, 61, 21],
    };
    cfg.episode.max_time = 25.0;
    cfg
}

fn run(cfg: &ScenarioConfig, method: UpdateMethod) -> Episode {
    let grid = cfg.grid().unwrap();
    run_episode(&cfg.setup(&grid), method, &cfg.episode).unwrap()
}

#[test]
fn episodes_replay_bit_for_bit() {
    let mut cfg = coarse("empty-world");
    cfg.episode.disturbance = DisturbanceMode::Random;
    cfg.episode.seed = 9;
    let a = run(&cfg, UpdateMethod::Local);
    let b = run(&cfg, UpdateMethod::Local);
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.decisions, b.decisions);

    cfg.episode.seed = 10;
    let c = run(&cfg, UpdateMethod::Local);
    assert_ne!(a.trajectory.samples, c.trajectory.samples);
}

#[test]
fn filter_is_least_restrictive_and_uses_past_snapshots() {
    let cfg = coarse("running-example");
    let ep = run(&cfg, UpdateMethod::Warm);
    assert_ne!(ep.trajectory.outcome, Outcome::Collided);
    assert!(ep.trajectory.min_obstacle_distance > 0.0);
    let eps = ep.snapshot.epsilon;
    let mut last_snapshot = f64::NEG_INFINITY;
    for r in &ep.decisions {
        let d = &r.decision;
        if d.value_at_state > eps {
            assert_eq!(d.mode, Mode::Planner, "t={}", r.t);
        }
        if d.mode == Mode::Planner {
            assert_eq!(d.control, r.planner_control, "t={}", r.t);
        }
        assert!(d.snapshot_time <= r.t + 1e-9);
        assert!(d.snapshot_time >= last_snapshot);
        last_snapshot = d.snapshot_time;
    }
    let times: Vec<f64> = ep.rebuilds.iter().map(|r| r.t).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));

    let grid = cfg.grid().unwrap();
    let start = initial_map(&cfg.setup(&grid), &cfg.episode).unwrap();
    assert!(start.known_free().is_subset_of(ep.map.known_free()));
    assert!(ep.map.known_free().count() > start.known_free().count());
}

#[test]
fn trajectory_and_decision_csv_layout() {
    let cfg = coarse("empty-world");
    let ep = run(&cfg, UpdateMethod::Local);
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &cfg.model, &ep.trajectory).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,px,py,phi,u_v,u_omega,mode,V");
    assert_eq!(lines.len(), ep.trajectory.samples.len() + 2);
    let last = lines.last().unwrap();
    assert!(
        last.starts_with(&format!("# outcome={}", ep.trajectory.outcome)),
        "{last}"
    );
    for row in &lines[1..lines.len() - 1] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 8);
        assert!(cells[6] == "planner" || cells[6] == "safety");
        assert!(cells[0].parse::<f64>().is_ok());
    }

    let mut buf = Vec::new();
    write_decision_log(
        &mut buf,
        cfg.model.state_labels(),
        cfg.model.control_labels(),
        &ep.decisions,
    )
    .unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut rows = text.lines();
    assert_eq!(
        rows.next().unwrap(),
        "t,px,py,phi,mode,u_v,u_omega,plan_v,plan_omega,value,snapshot_time,plateau,off_grid"
    );
    assert_eq!(rows.count(), ep.decisions.len());
}

#[test]
fn empty_world_reaches_the_goal_without_safety_override_at_the_start() {
    let cfg = coarse("empty-world");
    let ep = run(&cfg, UpdateMethod::Local);
    assert_eq!(ep.trajectory.outcome, Outcome::ReachedGoal);
    assert_eq!(ep.decisions[0].decision.mode, Mode::Planner);
}
