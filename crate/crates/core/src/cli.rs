//! `safenav` command line: run one episode, benchmark scenarios, or render a
//! slice of a saved snapshot.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error,
//! 3 collision, 4 timeout, 5 under-conservative safe set in a benchmark.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bench::{format_table, run_benchmark, write_rebuilds_csv, write_report_csv};
use crate::brs::{SafeSetSnapshot, UpdateMethod};
use crate::config::{ScenarioConfig, BUNDLED};
use crate::error::{Error, Result};
use crate::plot::{parse_slice, slice_svg, trajectory_svg};
use crate::safety::write_decision_log;
use crate::sim::{run_episode, write_trajectory_csv, Outcome};

/// Overrides the output directory of every command unless `--out` is given.
pub const OUT_DIR_ENV: &str = "SAFENAV_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COLLISION: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;
pub const EXIT_UNDER_CONSERVATIVE: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "safenav",
    version,
    about = "Reachability-filtered navigation in unknown environments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop episode.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        config: String,
        #[arg(long, value_parser = parse_method)]
        method: Option<UpdateMethod>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare full, warm and local rebuilds on every rebuild of each scenario.
    Bench {
        /// Glob over scenario files, or a bundled scenario name.
        config: String,
        #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "full,warm,local")]
        methods: Vec<UpdateMethod>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the zero and epsilon contours of a snapshot slice.
    Inspect {
        /// Snapshot `.field` file; a `.json` sidecar next to it supplies epsilon.
        snapshot: PathBuf,
        /// Fixed values of the non-position axes, e.g. "phi=1.57".
        #[arg(long)]
        slice: String,
        /// Output image; `slice.svg` in the output directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scenario whose obstacles are drawn under the slice.
        #[arg(long)]
        config: Option<String>,
    },
}

fn parse_method(s: &str) -> std::result::Result<UpdateMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit code for an error.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::Scenario(_)
        | Error::InvalidModel(_)
        | Error::DimensionMismatch(_)
        | Error::DegenerateExtent { .. }
        | Error::TooFewNodes { .. }
        | Error::OutOfBounds { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// `--out`, then the environment variable, then the fallback.
pub fn resolve_out_dir(flag: Option<&Path>, fallback: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => fallback.to_path_buf(),
    }
}

/// Loads a scenario from a path, falling back to the bundled set by name.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return ScenarioConfig::load(path);
    }
    if BUNDLED.iter().any(|(name, _)| *name == spec) {
        return ScenarioConfig::bundled(spec);
    }
    Err(Error::InvalidConfig(format!(
        "'{spec}' is neither a readable file nor a bundled scenario"
    )))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            method,
            seed,
            out,
        } => cmd_run(&config, method, seed, out.as_deref()),
        Command::Bench {
            config,
            methods,
            seeds,
            out,
        } => cmd_bench(&config, &methods, &seeds, out.as_deref()),
        Command::Inspect {
            snapshot,
            slice,
            out,
            config,
        } => cmd_inspect(&snapshot, &slice, out.as_deref(), config.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs one episode and writes its logs, plots and final snapshot.
pub fn cmd_run(
    config: &str,
    method: Option<UpdateMethod>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<i32> {
    let mut scenario = load_scenario(config)?;
    if let Some(m) = method {
        scenario.method = m;
    }
    if let Some(s) = seed {
        scenario.episode.seed = s;
    }
    let out_dir = resolve_out_dir(out, &scenario.output_dir);
    let grid = scenario.grid()?;
    let episode = run_episode(&scenario.setup(&grid), scenario.method, &scenario.episode)?;

    std::fs::create_dir_all(&out_dir)?;
    let traj = &episode.trajectory;
    write_trajectory_csv(
        create(&out_dir.join("trajectory.csv"))?,
        &scenario.model,
        traj,
    )?;
    write_decision_log(
        create(&out_dir.join("decisions.csv"))?,
        scenario.model.state_labels(),
        scenario.model.control_labels(),
        &episode.decisions,
    )?;
    let title = format!(
        "{} ({}, seed {})",
        scenario.name, scenario.method, scenario.episode.seed
    );
    std::fs::write(
        out_dir.join("trajectory.svg"),
        trajectory_svg(&scenario.environment, Some(&episode.map), traj, &title),
    )?;
    episode
        .map
        .write_pbm(create(&out_dir.join("known_free.pbm"))?)?;
    episode.snapshot.save(&out_dir, "snapshot")?;
    if let Some(axis) = scenario.model.heading_axis() {
        let mut slice: Vec<(usize, f64)> = vec![(axis, traj.final_state[axis])];
        for a in (grid.position_dims()..grid.ndim()).filter(|&a| a != axis) {
            let (lo, hi) = (grid.lower()[a], grid.upper()[a]);
            slice.push((a, traj.final_state[a].clamp(lo, hi)));
        }
        let img = slice_svg(
            &episode.snapshot.value,
            &slice,
            episode.snapshot.epsilon,
            Some(&scenario.environment),
            &title,
        )?;
        std::fs::write(out_dir.join("slice.svg"), img.svg)?;
    }
    let summary = serde_json::json!({
        "scenario": scenario.name,
        "method": scenario.method,
        "seed": scenario.episode.seed,
        "outcome": traj.outcome,
        "final_time": traj.final_time,
        "min_obstacle_distance": traj.min_obstacle_distance,
        "steps": traj.samples.len(),
        "safety_steps": traj.safety_steps(),
        "rebuilds": episode.rebuilds,
        "config_hash": scenario.config_hash()?,
    });
    serde_json::to_writer_pretty(create(&out_dir.join("summary.json"))?, &summary)?;

    let rebuilt = episode.rebuilds.iter().filter(|r| !r.skipped).count();
    let mean_secs = episode
        .rebuilds
        .iter()
        .filter(|r| !r.skipped)
        .map(|r| r.report.elapsed_seconds)
        .sum::<f64>()
        / rebuilt.max(1) as f64;
    println!(
        "{}: {} at t={:.2}s, min clearance {:.3}, {}/{} steps in safety mode, {rebuilt} rebuilds ({} mean {mean_secs:.3}s)",
        scenario.name,
        traj.outcome,
        traj.final_time,
        traj.min_obstacle_distance,
        traj.safety_steps(),
        traj.samples.len(),
        scenario.method
    );
    println!("outputs in {}", out_dir.display());
    Ok(match traj.outcome {
        Outcome::ReachedGoal => EXIT_OK,
        Outcome::Collided => EXIT_COLLISION,
        Outcome::Timeout => EXIT_TIMEOUT,
    })
}

/// Scenario files matching `pattern`, or the bundled scenario of that name.
pub fn scenarios_for(pattern: &str) -> Result<Vec<ScenarioConfig>> {
    if BUNDLED.iter().any(|(name, _)| *name == pattern) && !Path::new(pattern).exists() {
        return Ok(vec![ScenarioConfig::bundled(pattern)?]);
    }
    let paths = glob::glob(pattern)
        .map_err(|e| Error::InvalidConfig(format!("bad glob '{pattern}': {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        let p = p.map_err(|e| Error::Io(e.into()))?;
        out.push(ScenarioConfig::load(&p)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no scenario files match '{pattern}'"
        )));
    }
    Ok(out)
}

/// Benchmarks every matching scenario and writes `bench.csv`,
/// `bench_rebuilds.csv` and `bench.txt`.
pub fn cmd_bench(
    pattern: &str,
    methods: &[UpdateMethod],
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<i32> {
    let scenarios = scenarios_for(pattern)?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no seeds given".into()));
    }
    let out_dir = resolve_out_dir(out, &scenarios[0].output_dir);
    let reports = run_benchmark(&scenarios, methods, seeds)?;
    std::fs::create_dir_all(&out_dir)?;
    write_report_csv(create(&out_dir.join("bench.csv"))?, &reports)?;
    write_rebuilds_csv(create(&out_dir.join("bench_rebuilds.csv"))?, &reports)?;
    let table = format_table(&reports);
    std::fs::write(out_dir.join("bench.txt"), &table)?;
    print!("{table}");
    println!("outputs in {}", out_dir.display());
    if reports.iter().all(|r| r.conservative()) {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "under-conservative nodes found: an incremental safe set exceeds the full recompute"
        );
        Ok(EXIT_UNDER_CONSERVATIVE)
    }
}

/// Renders one slice of a saved snapshot.
pub fn cmd_inspect(
    snapshot: &Path,
    slice: &str,
    out: Option<&Path>,
    config: Option<&str>,
) -> Result<i32> {
    let snap = SafeSetSnapshot::load(snapshot)?;
    let spec = parse_slice(slice, snap.grid())?;
    let env = config
        .map(load_scenario)
        .transpose()?
        .map(|s| s.environment);
    let target = match out {
        Some(p) => p.to_path_buf(),
        None => resolve_out_dir(None, Path::new("out")).join("slice.svg"),
    };
    let title = format!(
        "{} ({}, t={:.2})",
        snapshot.display(),
        snap.method,
        snap.computed_at
    );
    let img = slice_svg(&snap.value, &spec, snap.epsilon, env.as_ref(), &title)?;
    if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&target, img.svg)?;
    println!(
        "{} safe nodes, {} epsilon-contour segments, written to {}",
        img.safe_nodes,
        img.epsilon_segments,
        target.display()
    );
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_method_is_a_usage_error() {
        assert_eq!(
            main_with_args(["safenav", "run", "empty-world", "--method", "bogus"]),
            2
        );
    }

    #[test]
    fn empty_glob_is_a_config_error() {
        let code = main_with_args(["safenav", "bench", "/nonexistent/dir/*.toml"]);
        assert_eq!(code, EXIT_CONFIG);
    }

    #[test]
    fn out_flag_beats_the_fallback() {
        let p = resolve_out_dir(Some(Path::new("a")), Path::new("b"));
        assert_eq!(p, PathBuf::from("a"));
    }
}
