//! Full vs warm vs local on every rebuild of one running-example episode,
//! with the camera sensor on a coarser grid so it finishes in a few minutes.

use safenav::bench::{format_table, run_benchmark};
use safenav::brs::UpdateMethod;
use safenav::config::ScenarioConfig;
use safenav::env::SensorSpec;

fn main() -> safenav::Result<()> {
    let mut scenario = ScenarioConfig::bundled("running-example")?;
    scenario.name = "running-example/camera".into();
    scenario.sensor = SensorSpec::camera();
    scenario.grid.counts = vec![61, 61, 31];
    let reports = run_benchmark(&[scenario], &UpdateMethod::ALL, &[1])?;
    print!("{}", format_table(&reports));
    for rep in &reports {
        let full = rep
            .row(UpdateMethod::Full)
            .map(|r| r.mean_seconds)
            .unwrap_or(f64::NAN);
        for row in &rep.rows {
            println!(
                "{:>5}: {:.2}x faster than full ({:.3}s vs {full:.3}s)",
                row.method.as_str(),
                row.speedup,
                row.mean_seconds
            );
        }
        println!(
            "every incremental safe set inside the full one: {}",
            rep.conservative()
        );
    }
    Ok(())
}
