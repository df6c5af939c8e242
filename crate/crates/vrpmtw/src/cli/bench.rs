//! Benchmark harness: generates a grid of instances (window modes x seeds),
//! runs every requested method on each one in a worker pool, and reports an
//! aligned table per mode, a long-form CSV, and a manifest. Also hosts the
//! shake-removal comparison report.

use super::manifest::{ManifestRow, RunManifest};
use super::{execute, parse_mode, Method};
use crate::construct::greedy_construct;
use crate::gen::{generate, GenConfig, WindowMode};
use crate::model::{evaluate, total_length, Metrics};
use crate::neural::net::{ArchConfig, NetParams};
use crate::neural::rlavns::load_policy;
use crate::search::{vns_with, SearchBudget, SearchOptions, ShakeMode};
use crate::stats::mean;
use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Customers per instance
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Comma-separated window modes (1tw,2tw,3tw,mix)
    #[arg(long, value_parser = parse_mode, value_delimiter = ',', default_value = "3tw")]
    pub modes: Vec<WindowMode>,
    /// Instances per mode (consecutive seeds)
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// First instance seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Operator applications per heuristic run
    #[arg(long, default_value_t = 1000)]
    pub budget: u64,
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = vec![Method::Greedy, Method::Vns, Method::Rvns, Method::Avns])]
    pub methods: Vec<Method>,
    /// Trained policy checkpoint (required when methods include rl-avns)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Per-instance time limit for the exact method, seconds
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    /// Compare slack-guided against random shake removal instead of the
    /// method grid
    #[arg(long, default_value_t = false)]
    pub shaking_report: bool,
}

/// Percent by which `value` improves on `baseline`; positive means shorter.
pub fn gain_percent(baseline: f64, value: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - value) / baseline * 100.0
    }
}

pub fn format_gain(baseline: f64, value: f64) -> String {
    format!("{:.1}%", gain_percent(baseline, value))
}

/// Worker override from the VRPMTW_WORKERS environment variable.
pub fn workers_from_env() -> Option<usize> {
    parse_workers(std::env::var("VRPMTW_WORKERS").ok())
}

fn parse_workers(raw: Option<String>) -> Option<usize> {
    raw.and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|w| *w > 0)
}

fn make_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers_from_env() {
        builder = builder.num_threads(w);
    }
    Ok(builder.build()?)
}

#[derive(Debug, Clone)]
struct RunRecord {
    mode: WindowMode,
    seed: u64,
    instance: String,
    method: Method,
    length: f64,
    duration: f64,
    vehicles: usize,
    solve_time: f64,
    /// Greedy construction length on the same instance.
    baseline: f64,
}

pub fn run_bench(args: BenchArgs) -> anyhow::Result<()> {
    if args.shaking_report {
        return run_shaking_report(&args);
    }
    let policy: Option<(ArchConfig, NetParams)> = if args.methods.contains(&Method::RlAvns) {
        let path = args
            .checkpoint
            .as_ref()
            .context("--checkpoint is required when benchmarking rl-avns")?;
        Some(load_policy(path)?)
    } else {
        None
    };
    let started = Instant::now();
    let jobs: Vec<(WindowMode, u64)> = args
        .modes
        .iter()
        .flat_map(|&m| (args.seed..args.seed + args.seeds).map(move |s| (m, s)))
        .collect();
    let pool = make_pool()?;
    let nested: Vec<Vec<RunRecord>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mode, seed)| bench_one(&args, mode, seed, policy.as_ref()))
            .collect::<anyhow::Result<_>>()
    })?;
    let mut records: Vec<RunRecord> = nested.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.mode.tag(), a.seed, a.method.label()).cmp(&(b.mode.tag(), b.seed, b.method.label()))
    });

    for &mode in &args.modes {
        print_mode_table(&args, mode, &records);
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    write_records_csv(&records, &args.out.join("bench.csv"))?;
    let config_json = serde_json::to_string(&args)?;
    let mut man = RunManifest::new("bench", args.seed, &config_json);
    man.workers = Some(pool.current_num_threads());
    man.elapsed_seconds = started.elapsed().as_secs_f64();
    man.rows = records
        .iter()
        .map(|r| ManifestRow {
            instance: r.instance.clone(),
            method: r.method.label().to_string(),
            seed: r.seed,
            length: r.length,
            duration: r.duration,
            vehicles_used: r.vehicles,
            solve_time: r.solve_time,
        })
        .collect();
    man.write(&args.out.join("manifest.json"))?;
    println!(
        "\n{} runs in {:.1}s; results in {}",
        records.len(),
        man.elapsed_seconds,
        args.out.display()
    );
    Ok(())
}

fn bench_one(
    args: &BenchArgs,
    mode: WindowMode,
    seed: u64,
    policy: Option<&(ArchConfig, NetParams)>,
) -> anyhow::Result<Vec<RunRecord>> {
    let instance = generate(&GenConfig::new(args.n, mode, seed))?;
    let baseline = total_length(&instance, &greedy_construct(&instance)?);
    let mut out = Vec::with_capacity(args.methods.len());
    for &method in &args.methods {
        let started = Instant::now();
        let outcome = execute(
            &instance,
            method,
            args.budget,
            seed,
            Some(args.time_limit),
            policy,
            &SearchOptions::default(),
        )?;
        let elapsed = started.elapsed().as_secs_f64();
        let schedule = evaluate(&instance, &outcome.solution)?;
        anyhow::ensure!(
            schedule.feasible,
            "{} produced an infeasible solution on {}",
            method.label(),
            instance.name
        );
        let metrics = Metrics::compute(&instance, &outcome.solution, &schedule, elapsed);
        out.push(RunRecord {
            mode,
            seed,
            instance: instance.name.clone(),
            method,
            length: metrics.length,
            duration: metrics.duration,
            vehicles: metrics.vehicles_used,
            solve_time: metrics.solve_time,
            baseline,
        });
    }
    Ok(out)
}

fn print_mode_table(args: &BenchArgs, mode: WindowMode, records: &[RunRecord]) {
    let of_mode: Vec<&RunRecord> = records.iter().filter(|r| r.mode == mode).collect();
    if of_mode.is_empty() {
        return;
    }
    // One baseline value per instance; methods share it.
    let mut baselines: Vec<f64> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in &of_mode {
        if seen.insert(r.seed) {
            baselines.push(r.baseline);
        }
    }
    let baseline_mean = mean(&baselines);
    println!(
        "\n== mode {}  (n={}, seeds {}..{}, budget {})",
        mode.tag(),
        args.n,
        args.seed,
        args.seed + args.seeds - 1,
        args.budget
    );
    println!(
        "{:<8} {:>12} {:>8} {:>14} {:>9} {:>9}",
        "method", "mean_length", "gain", "mean_duration", "vehicles", "time_s"
    );
    for &method in &args.methods {
        let runs: Vec<&&RunRecord> = of_mode.iter().filter(|r| r.method == method).collect();
        if runs.is_empty() {
            continue;
        }
        let len = mean(&runs.iter().map(|r| r.length).collect::<Vec<_>>());
        let dur = mean(&runs.iter().map(|r| r.duration).collect::<Vec<_>>());
        let veh = mean(&runs.iter().map(|r| r.vehicles as f64).collect::<Vec<_>>());
        let secs = mean(&runs.iter().map(|r| r.solve_time).collect::<Vec<_>>());
        println!(
            "{:<8} {:>12.2} {:>8} {:>14.2} {:>9.2} {:>9.3}",
            method.label(),
            len,
            format_gain(baseline_mean, len),
            dur,
            veh,
            secs
        );
    }
}

fn write_records_csv(records: &[RunRecord], path: &std::path::Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode",
        "method",
        "seed",
        "instance",
        "length",
        "duration",
        "vehicles",
        "solve_time",
    ])?;
    for r in records {
        w.write_record([
            r.mode.tag().to_string(),
            r.method.label().to_string(),
            r.seed.to_string(),
            r.instance.clone(),
            format!("{}", r.length),
            format!("{}", r.duration),
            r.vehicles.to_string(),
            format!("{}", r.solve_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
struct ShakeRow {
    mode: WindowMode,
    seed: u64,
    instance: String,
    guided: f64,
    random: f64,
}

/// Pairs a slack-guided and a random-removal search on identical instances
/// and seeds, so the removal rule is the only difference.
fn run_shaking_report(args: &BenchArgs) -> anyhow::Result<()> {
    let jobs: Vec<(WindowMode, u64)> = args
        .modes
        .iter()
        .flat_map(|&m| (args.seed..args.seed + args.seeds).map(move |s| (m, s)))
        .collect();
    let pool = make_pool()?;
    let mut rows: Vec<ShakeRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mode, seed)| -> anyhow::Result<ShakeRow> {
                let instance = generate(&GenConfig::new(args.n, mode, seed))?;
                let x0 = greedy_construct(&instance)?;
                let budget = SearchBudget::new(args.budget, seed);
                let guided = vns_with(
                    &instance,
                    &x0,
                    &budget,
                    &SearchOptions {
                        shake_mode: ShakeMode::FitnessGuided,
                    },
                )?;
                let random = vns_with(
                    &instance,
                    &x0,
                    &budget,
                    &SearchOptions {
                        shake_mode: ShakeMode::RandomRemoval,
                    },
                )?;
                Ok(ShakeRow {
                    mode,
                    seed,
                    guided: total_length(&instance, &guided.0),
                    random: total_length(&instance, &random.0),
                    instance: instance.name,
                })
            })
            .collect::<anyhow::Result<_>>()
    })?;
    rows.sort_by(|a, b| (a.mode.tag(), a.seed).cmp(&(b.mode.tag(), b.seed)));

    println!(
        "shake removal comparison  (n={}, seeds {}..{}, budget {})",
        args.n,
        args.seed,
        args.seed + args.seeds - 1,
        args.budget
    );
    println!(
        "{:<6} {:>14} {:>14} {:>8}",
        "mode", "guided_length", "random_length", "gain"
    );
    for &mode in &args.modes {
        let of_mode: Vec<&ShakeRow> = rows.iter().filter(|r| r.mode == mode).collect();
        if of_mode.is_empty() {
            continue;
        }
        let g = mean(&of_mode.iter().map(|r| r.guided).collect::<Vec<_>>());
        let r = mean(&of_mode.iter().map(|r| r.random).collect::<Vec<_>>());
        println!(
            "{:<6} {:>14.2} {:>14.2} {:>8}",
            mode.tag(),
            g,
            r,
            format_gain(r, g)
        );
        let direction = if g <= r { "improves on" } else { "trails" };
        println!(
            "       slack-guided removal {} random removal by {:.1}% here",
            direction,
            gain_percent(r, g).abs()
        );
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = csv::Writer::from_path(args.out.join("shaking.csv"))?;
    w.write_record(["mode", "seed", "instance", "guided_length", "random_length"])?;
    for row in &rows {
        w.write_record([
            row.mode.tag().to_string(),
            row.seed.to_string(),
            row.instance.clone(),
            format!("{}", row.guided),
            format!("{}", row.random),
        ])?;
    }
    w.flush()?;
    Ok(())
}
