//! Scenario files: load a bundled one, change it, write it back out, and see
//! what validation rejects.

use safenav::config::{ScenarioConfig, BUNDLED};

fn main() -> safenav::Result<()> {
    for (name, _) in BUNDLED {
        let s = ScenarioConfig::bundled(name)?;
        println!(
            "{name:<16} {} obstacles, grid {:?}, {} sensor, planner {}, hash {}",
            s.environment.obstacles.len(),
            s.grid.counts,
            format!("{:?}", s.sensor.kind).to_lowercase(),
            s.planner.kind.as_str(),
            s.config_hash()?
        );
    }

    let mut s = ScenarioConfig::bundled("empty-world")?;
    s.episode.max_time = 30.0;
    s.episode.seed = 42;
    let text = s.to_toml()?;
    let back = ScenarioConfig::from_toml(&text)?;
    assert_eq!(back, s);
    println!("\nround trip ok; first lines of the edited file:");
    for line in text.lines().take(8) {
        println!("  {line}");
    }

    let bad = text.replace("start = [2.0, 2.5, 0.0]", "start = [20.0, 2.5, 0.0]");
    match ScenarioConfig::from_toml(&bad) {
        Err(e) => println!("\nrejected: {e}"),
        Ok(_) => println!("\nunexpectedly accepted"),
    }
    Ok(())
}
