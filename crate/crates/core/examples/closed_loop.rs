//! One closed-loop episode of the running example: sense, rebuild the safe
//! set every second, filter the planner and log everything.
//!
//!     cargo run --release --example closed_loop -- [full|warm|local] [camera]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use safenav::brs::UpdateMethod;
use safenav::config::ScenarioConfig;
use safenav::env::SensorSpec;
use safenav::plot::trajectory_svg;
use safenav::safety::write_decision_log;
use safenav::sim::{run_episode, write_trajectory_csv};

fn main() -> safenav::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut scenario = ScenarioConfig::bundled("running-example")?;
    scenario.grid.counts = vec![61, 61, 31];
    if let Some(m) = args.first() {
        scenario.method = m.parse::<UpdateMethod>()?;
    }
    if args.iter().any(|a| a == "camera") {
        scenario.sensor = SensorSpec::camera();
    }
    let grid = scenario.grid()?;
    let episode = run_episode(&scenario.setup(&grid), scenario.method, &scenario.episode)?;
    let traj = &episode.trajectory;
    println!(
        "{} with {} rebuilds: {} at t={:.2}s, min clearance {:.3}",
        scenario.name, scenario.method, traj.outcome, traj.final_time, traj.min_obstacle_distance
    );
    for r in episode.rebuilds.iter().filter(|r| !r.skipped) {
        println!(
            "  t={:>5.2}  {:>4} new cells  {:>6} sweeps  {:.3}s",
            r.t, r.newly_free, r.report.iterations, r.report.elapsed_seconds
        );
    }
    println!(
        "{} of {} steps in safety mode",
        traj.safety_steps(),
        traj.samples.len()
    );

    let out = PathBuf::from(std::env::var("SAFENAV_OUT_DIR").unwrap_or_else(|_| "out".into()))
        .join("closed_loop");
    std::fs::create_dir_all(&out)?;
    write_trajectory_csv(
        BufWriter::new(File::create(out.join("trajectory.csv"))?),
        &scenario.model,
        traj,
    )?;
    write_decision_log(
        BufWriter::new(File::create(out.join("decisions.csv"))?),
        scenario.model.state_labels(),
        scenario.model.control_labels(),
        &episode.decisions,
    )?;
    std::fs::write(
        out.join("trajectory.svg"),
        trajectory_svg(
            &scenario.environment,
            Some(&episode.map),
            traj,
            &scenario.name,
        ),
    )?;
    println!("logs and plot in {}", out.display());
    Ok(())
}
