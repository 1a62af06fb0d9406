//! Per-rebuild comparison of the three update methods.
//!
//! One episode is driven with the scenario's method. At every rebuild the
//! other methods are run on the same `(V_last, l_t, newly_free)` inputs and
//! compared node by node against the full recompute.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::brs::{rebuild, SafeSetSnapshot, UpdateMethod};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::sim::{run_episode_observed, Outcome, RebuildEvent};

/// One method on one rebuild event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSample {
    pub method: UpdateMethod,
    pub seconds: f64,
    pub iterations: usize,
    pub nodes_updated: u64,
    pub over_pct: f64,
    pub under_pct: f64,
    /// Nodes this method calls safe while the full recompute does not.
    pub under_nodes: usize,
    /// Largest `V_method - V_full` over all nodes.
    pub max_excess: f64,
    /// Error text when the method failed on this event.
    pub error: Option<String>,
}

impl MethodSample {
    fn failed(method: UpdateMethod, err: &Error) -> Self {
        Self {
            method,
            seconds: f64::NAN,
            iterations: 0,
            nodes_updated: 0,
            over_pct: f64::NAN,
            under_pct: f64::NAN,
            under_nodes: 0,
            max_excess: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RebuildComparison {
    pub seed: u64,
    pub t: f64,
    /// Newly free nodes over the full state grid.
    pub newly_free: usize,
    pub samples: Vec<MethodSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub outcome: Outcome,
    pub final_time: f64,
    pub min_obstacle_distance: f64,
    pub safety_steps: usize,
    pub rebuilds: usize,
}

/// Aggregate over every rebuild of every seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: UpdateMethod,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub rebuilds: usize,
    pub failed: usize,
    pub mean_over_pct: f64,
    pub max_over_pct: f64,
    pub max_under_pct: f64,
    pub under_nodes: usize,
    pub max_excess: f64,
    pub mean_iterations: f64,
    pub mean_nodes_updated: f64,
    /// Full mean seconds over this method's mean seconds.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: String,
    pub sensor: String,
    pub planner: String,
    pub driver: UpdateMethod,
    pub grid_counts: Vec<usize>,
    pub grid_nodes: usize,
    pub config_hash: String,
    pub episodes: Vec<EpisodeSummary>,
    pub rows: Vec<MethodRow>,
    pub rebuilds: Vec<RebuildComparison>,
}

impl BenchReport {
    pub fn row(&self, method: UpdateMethod) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// True when no method labelled any node safe that the full recompute
    /// labelled unsafe.
    pub fn conservative(&self) -> bool {
        self.rows.iter().all(|r| r.under_nodes == 0)
    }
}

/// Largest `a - b` and the number of nodes safe in `a` but not in `b`.
fn excess(a: &SafeSetSnapshot, b: &SafeSetSnapshot) -> (f64, usize) {
    let mut worst = f64::NEG_INFINITY;
    let mut under = 0;
    for (&va, &vb) in a.value.values().iter().zip(b.value.values()) {
        worst = worst.max(va - vb);
        if va > a.epsilon && vb <= b.epsilon {
            under += 1;
        }
    }
    (worst, under)
}

fn compare(
    event: &RebuildEvent<'_>,
    methods: &[UpdateMethod],
    scenario: &ScenarioConfig,
) -> Result<Vec<MethodSample>> {
    let epsilon = event.snapshot.epsilon;
    let run = |m: UpdateMethod| -> Result<SafeSetSnapshot> {
        if m == event.snapshot.method {
            return Ok(event.snapshot.clone());
        }
        rebuild(
            m,
            &event.previous.value,
            event.l,
            event.newly_free,
            &scenario.model,
            &scenario.solver,
        )
        .map(|s| s.with_epsilon(epsilon))
    };
    let full = run(UpdateMethod::Full)?;
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let snap = match m {
            UpdateMethod::Full => Ok(full.clone()),
            _ => run(m),
        };
        match snap {
            Ok(snap) => {
                let (over_pct, under_pct) = crate::brs::diff_safe_sets(&snap, &full)?;
                let (max_excess, under_nodes) = excess(&snap, &full);
                out.push(MethodSample {
                    method: m,
                    seconds: snap.report.elapsed_seconds,
                    iterations: snap.report.iterations,
                    nodes_updated: snap.report.nodes_updated_total,
                    over_pct,
                    under_pct,
                    under_nodes,
                    max_excess,
                    error: None,
                });
            }
            Err(e @ (Error::NotConverged { .. } | Error::QueueDidNotDrain { .. })) => {
                log::warn!("{m} failed at t={:.2}: {e}", event.t);
                out.push(MethodSample::failed(m, &e));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(methods: &[UpdateMethod], rebuilds: &[RebuildComparison]) -> Vec<MethodRow> {
    let mut rows: Vec<MethodRow> = methods
        .iter()
        .map(|&m| {
            let samples: Vec<&MethodSample> = rebuilds
                .iter()
                .flat_map(|r| r.samples.iter().filter(move |s| s.method == m))
                .collect();
            let ok: Vec<&MethodSample> = samples
                .iter()
                .copied()
                .filter(|s| s.error.is_none())
                .collect();
            let secs: Vec<f64> = ok.iter().map(|s| s.seconds).collect();
            let (mean_seconds, std_seconds) = mean_std(&secs);
            let over: Vec<f64> = ok.iter().map(|s| s.over_pct).collect();
            let max_of =
                |f: fn(&MethodSample) -> f64| ok.iter().map(|s| f(s)).fold(f64::NAN, f64::max);
            MethodRow {
                method: m,
                mean_seconds,
                std_seconds,
                rebuilds: samples.len(),
                failed: samples.len() - ok.len(),
                mean_over_pct: mean_std(&over).0,
                max_over_pct: max_of(|s| s.over_pct),
                max_under_pct: max_of(|s| s.under_pct),
                under_nodes: ok.iter().map(|s| s.under_nodes).sum(),
                max_excess: max_of(|s| s.max_excess),
                mean_iterations: mean_std(
                    &ok.iter().map(|s| s.iterations as f64).collect::<Vec<_>>(),
                )
                .0,
                mean_nodes_updated: mean_std(
                    &ok.iter()
                        .map(|s| s.nodes_updated as f64)
                        .collect::<Vec<_>>(),
                )
                .0,
                speedup: f64::NAN,
            }
        })
        .collect();
    let full_mean = mean_std(
        &rebuilds
            .iter()
            .flat_map(|r| r.samples.iter())
            .filter(|s| s.method == UpdateMethod::Full && s.error.is_none())
            .map(|s| s.seconds)
            .collect::<Vec<_>>(),
    )
    .0;
    for row in &mut rows {
        row.speedup = full_mean / row.mean_seconds;
    }
    rows
}

/// Benchmarks one scenario over `seeds`, driving each episode with the
/// scenario's own method. The full recompute is always run as the reference.
pub fn bench_scenario(
    scenario: &ScenarioConfig,
    methods: &[UpdateMethod],
    seeds: &[u64],
) -> Result<BenchReport> {
    scenario.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig(
            "no update methods to benchmark".into(),
        ));
    }
    let grid = scenario.grid()?;
    let setup = scenario.setup(&grid);
    let mut episodes = Vec::new();
    let mut rebuilds = Vec::new();
    for &seed in seeds {
        let cfg = crate::sim::EpisodeConfig {
            seed,
            ..scenario.episode.clone()
        };
        let mut events = Vec::new();
        let episode = run_episode_observed(&setup, scenario.method, &cfg, &mut |event| {
            let samples = compare(event, methods, scenario)?;
            events.push(RebuildComparison {
                seed,
                t: event.t,
                newly_free: event.newly_free.count(),
                samples,
            });
            Ok(())
        })?;
        log::info!(
            "{} seed {seed}: {} after {:.2}s, {} compared rebuilds",
            scenario.name,
            episode.trajectory.outcome,
            episode.trajectory.final_time,
            events.len()
        );
        episodes.push(EpisodeSummary {
            seed,
            outcome: episode.trajectory.outcome,
            final_time: episode.trajectory.final_time,
            min_obstacle_distance: episode.trajectory.min_obstacle_distance,
            safety_steps: episode.trajectory.safety_steps(),
            rebuilds: events.len(),
        });
        rebuilds.extend(events);
    }
    Ok(BenchReport {
        scenario: scenario.name.clone(),
        sensor: format!("{:?}", scenario.sensor.kind).to_lowercase(),
        planner: scenario.planner.kind.as_str().to_string(),
        driver: scenario.method,
        grid_counts: grid.counts().to_vec(),
        grid_nodes: grid.len(),
        config_hash: scenario.config_hash()?,
        episodes,
        rows: aggregate(methods, &rebuilds),
        rebuilds,
    })
}

/// [`bench_scenario`] for each scenario in turn.
pub fn run_benchmark(
    scenarios: &[ScenarioConfig],
    methods: &[UpdateMethod],
    seeds: &[u64],
) -> Result<Vec<BenchReport>> {
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig("no scenarios to benchmark".into()));
    }
    scenarios
        .iter()
        .map(|s| bench_scenario(s, methods, seeds))
        .collect()
}

/// One line per (scenario, method).
pub fn write_report_csv(w: impl Write, reports: &[BenchReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scenario",
        "sensor",
        "planner",
        "method",
        "rebuilds",
        "failed",
        "mean_seconds",
        "std_seconds",
        "speedup",
        "mean_over_pct",
        "max_over_pct",
        "max_under_pct",
        "under_nodes",
        "max_excess",
        "mean_iterations",
        "mean_nodes_updated",
        "grid",
        "grid_nodes",
        "config_hash",
    ])?;
    for rep in reports {
        let grid = rep
            .grid_counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x");
        for r in &rep.rows {
            out.write_record([
                rep.scenario.clone(),
                rep.sensor.clone(),
                rep.planner.clone(),
                r.method.to_string(),
                r.rebuilds.to_string(),
                r.failed.to_string(),
                format!("{:.6}", r.mean_seconds),
                format!("{:.6}", r.std_seconds),
                format!("{:.3}", r.speedup),
                format!("{:.4}", r.mean_over_pct),
                format!("{:.4}", r.max_over_pct),
                format!("{:.4}", r.max_under_pct),
                r.under_nodes.to_string(),
                format!("{:.3e}", r.max_excess),
                format!("{:.1}", r.mean_iterations),
                format!("{:.0}", r.mean_nodes_updated),
                grid.clone(),
                rep.grid_nodes.to_string(),
                rep.config_hash.clone(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One line per (scenario, seed, rebuild, method).
pub fn write_rebuilds_csv(w: impl Write, reports: &[BenchReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scenario",
        "seed",
        "t",
        "newly_free",
        "method",
        "seconds",
        "iterations",
        "nodes_updated",
        "over_pct",
        "under_pct",
        "under_nodes",
        "max_excess",
        "error",
    ])?;
    for rep in reports {
        for r in &rep.rebuilds {
            for s in &r.samples {
                out.write_record([
                    rep.scenario.clone(),
                    r.seed.to_string(),
                    format!("{:.3}", r.t),
                    r.newly_free.to_string(),
                    s.method.to_string(),
                    format!("{:.6}", s.seconds),
                    s.iterations.to_string(),
                    s.nodes_updated.to_string(),
                    format!("{:.4}", s.over_pct),
                    format!("{:.4}", s.under_pct),
                    s.under_nodes.to_string(),
                    format!("{:.3e}", s.max_excess),
                    s.error.clone().unwrap_or_default(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Fixed-width text table.
pub fn format_table(reports: &[BenchReport]) -> String {
    let mut s = String::new();
    for rep in reports {
        let grid = rep
            .grid_counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let _ = writeln!(
            s,
            "{} ({} / {}, grid {grid}, driven by {}, config {})",
            rep.scenario, rep.sensor, rep.planner, rep.driver, rep.config_hash
        );
        for e in &rep.episodes {
            let _ = writeln!(
                s,
                "  seed {:>3}: {} at {:.2}s, min clearance {:.3}, {} safety steps",
                e.seed, e.outcome, e.final_time, e.min_obstacle_distance, e.safety_steps
            );
        }
        let _ = writeln!(
            s,
            "  {:<6} {:>8} {:>12} {:>10} {:>9} {:>10} {:>10} {:>7} {:>11}",
            "method",
            "rebuilds",
            "mean time s",
            "std s",
            "speedup",
            "over % avg",
            "over % max",
            "under",
            "max excess"
        );
        for r in &rep.rows {
            let failed = if r.failed > 0 {
                format!(" ({} failed)", r.failed)
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "  {:<6} {:>8} {:>12.4} {:>10.4} {:>8.2}x {:>10.4} {:>10.4} {:>7} {:>11.2e}{failed}",
                r.method.as_str(),
                r.rebuilds,
                r.mean_seconds,
                r.std_seconds,
                r.speedup,
                r.mean_over_pct,
                r.max_over_pct,
                r.under_nodes,
                r.max_excess
            );
        }
        s.push('\n');
    }
    s
}
