//! Command line for the toolkit: instance generation, solving, policy
//! training and benchmarking. All verbs are reproducible from their seed and
//! write their resolved configuration (hashed) into a run manifest.

pub mod bench;
pub mod manifest;

use crate::construct::greedy_construct;
use crate::exact::solve_exact;
use crate::gen::{generate, GenConfig, WindowMode};
use crate::model::{evaluate, load_instance, save_instance, save_solution, Metrics, Solution};
use crate::neural::net::{ArchConfig, NetParams};
use crate::neural::rlavns::{load_policy, rl_avns_with};
use crate::neural::train::{load_checkpoint, save_checkpoint, write_train_log, TrainConfig, TrainState};
use crate::search::{avns_with, rvns_with, vns_with, SearchBudget, SearchOptions, Trace};
use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::{ManifestRow, RunManifest};
use serde::Serialize;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

#[derive(Debug, Parser)]
#[command(
    name = "vrpmtw",
    version,
    about = "Vehicle routing with multiple time windows: generate, solve, train, benchmark"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded instances as JSON files
    Gen(GenArgs),
    /// Solve one instance file with one method
    Solve(SolveArgs),
    /// Train the operator-selection policy
    Train(TrainArgs),
    /// Run a method grid over generated instances and tabulate the results
    Bench(bench::BenchArgs),
}

pub(crate) fn parse_mode(s: &str) -> Result<WindowMode, String> {
    WindowMode::parse(s)
        .ok_or_else(|| format!("unknown window mode {s:?}; expected 1tw, 2tw, 3tw or mix"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Greedy,
    Vns,
    Rvns,
    Avns,
    RlAvns,
    Exact,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Vns => "vns",
            Method::Rvns => "rvns",
            Method::Avns => "avns",
            Method::RlAvns => "rl-avns",
            Method::Exact => "exact",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Customers per instance
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Window mode: 1tw, 2tw, 3tw or mix
    #[arg(long, value_parser = parse_mode, default_value = "3tw")]
    pub mode: WindowMode,
    /// Seed of the first instance
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// How many instances (consecutive seeds) to write
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Instance JSON file
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Operator applications allowed (ignored by greedy and exact)
    #[arg(long, default_value_t = 1000)]
    pub budget: u64,
    /// Seed for the search randomness
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Time limit in seconds (exact method only; unlimited when absent)
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Trained policy checkpoint (required for rl-avns)
    #[arg(long, required_if_eq("method", "rl-avns"))]
    pub checkpoint: Option<PathBuf>,
    /// Directory for the solution, manifest and optional trace
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the per-iteration trace CSV (needs --out)
    #[arg(long, default_value_t = false)]
    pub trace: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Episodes to run in this invocation
    #[arg(long, default_value_t = 200)]
    pub episodes: u64,
    /// Operator applications per episode
    #[arg(long, default_value_t = 50)]
    pub steps: u64,
    /// Customers per training instance
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_parser = parse_mode, default_value = "3tw")]
    pub mode: WindowMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint output path
    #[arg(long, default_value = "checkpoint.json")]
    pub out: PathBuf,
    /// Resume from this checkpoint; its embedded configuration wins
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Episode log CSV for this invocation
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Solve(args) => run_solve(args),
        Command::Train(args) => run_train(args),
        Command::Bench(args) => bench::run_bench(args),
    }
}

fn run_gen(args: GenArgs) -> anyhow::Result<()> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for k in 0..args.count {
        let cfg = GenConfig::new(args.n, args.mode, args.seed + k);
        let instance = generate(&cfg)?;
        let path = args.out.join(format!("{}.json", instance.name));
        save_instance(&instance, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

/// What one method run produced; `proven_optimal` is only set by `exact`.
pub(crate) struct SolveOutcome {
    pub solution: Solution,
    pub trace: Option<Trace>,
    pub proven_optimal: Option<bool>,
}

/// Shared method dispatch for `solve` and `bench`.
pub(crate) fn execute(
    instance: &crate::model::Instance,
    method: Method,
    budget: u64,
    seed: u64,
    time_limit: Option<f64>,
    policy: Option<&(ArchConfig, NetParams)>,
    options: &SearchOptions,
) -> anyhow::Result<SolveOutcome> {
    let outcome = match method {
        Method::Greedy => SolveOutcome {
            solution: greedy_construct(instance)?,
            trace: None,
            proven_optimal: None,
        },
        Method::Vns | Method::Rvns | Method::Avns => {
            let x0 = greedy_construct(instance)?;
            let b = SearchBudget::new(budget, seed);
            let (solution, trace) = match method {
                Method::Vns => vns_with(instance, &x0, &b, options)?,
                Method::Rvns => rvns_with(instance, &x0, &b, options)?,
                _ => avns_with(instance, &x0, &b, options)?,
            };
            SolveOutcome {
                solution,
                trace: Some(trace),
                proven_optimal: None,
            }
        }
        Method::RlAvns => {
            let (arch, params) = policy.context("rl-avns needs a trained policy checkpoint")?;
            let x0 = greedy_construct(instance)?;
            let b = SearchBudget::new(budget, seed);
            let (solution, trace) = rl_avns_with(instance, &x0, &b, options, arch, params)?;
            SolveOutcome {
                solution,
                trace: Some(trace),
                proven_optimal: None,
            }
        }
        Method::Exact => {
            let res = solve_exact(instance, time_limit.map(Duration::from_secs_f64))?;
            SolveOutcome {
                solution: res.solution,
                trace: None,
                proven_optimal: Some(res.proven_optimal),
            }
        }
    };
    Ok(outcome)
}

fn run_solve(args: SolveArgs) -> anyhow::Result<()> {
    let instance = load_instance(&args.instance)
        .with_context(|| format!("loading {}", args.instance.display()))?;
    instance.validate()?;
    let policy = match (&args.checkpoint, args.method) {
        (Some(path), Method::RlAvns) => Some(load_policy(path)?),
        _ => None,
    };
    let started = Instant::now();
    let outcome = execute(
        &instance,
        args.method,
        args.budget,
        args.seed,
        args.time_limit,
        policy.as_ref(),
        &SearchOptions::default(),
    )?;
    let elapsed = started.elapsed().as_secs_f64();
    let schedule = evaluate(&instance, &outcome.solution)?;
    anyhow::ensure!(
        schedule.feasible,
        "internal error: {} produced an infeasible solution",
        args.method.label()
    );
    let metrics = Metrics::compute(&instance, &outcome.solution, &schedule, elapsed);
    println!(
        "{} {}: length {:.2}  duration {:.2}  vehicles {}  time {:.3}s",
        instance.name,
        args.method.label(),
        metrics.length,
        metrics.duration,
        metrics.vehicles_used,
        metrics.solve_time,
    );
    if let Some(proven) = outcome.proven_optimal {
        println!("proven optimal: {proven}");
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let stem = args
            .instance
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("instance");
        let base = format!("{stem}-{}", args.method.label());
        save_solution(&outcome.solution, &dir.join(format!("{base}.solution.json")))?;
        if args.trace {
            match &outcome.trace {
                Some(trace) => {
                    let f = fs::File::create(dir.join(format!("{base}.trace.csv")))?;
                    trace.write_csv(f)?;
                }
                None => eprintln!(
                    "note: {} records no iteration trace",
                    args.method.label()
                ),
            }
        }
        let config_json = serde_json::to_string(&args)?;
        let mut man = RunManifest::new("solve", args.seed, &config_json);
        man.elapsed_seconds = elapsed;
        man.rows.push(ManifestRow {
            instance: instance.name.clone(),
            method: args.method.label().to_string(),
            seed: args.seed,
            length: metrics.length,
            duration: metrics.duration,
            vehicles_used: metrics.vehicles_used,
            solve_time: metrics.solve_time,
        });
        man.write(&dir.join(format!("{base}.manifest.json")))?;
    } else if args.trace {
        eprintln!("note: --trace needs --out, no trace written");
    }
    Ok(())
}

fn run_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut state = match &args.resume {
        Some(path) => {
            let st = load_checkpoint(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?;
            println!("resuming at episode {}", st.episode);
            st
        }
        None => TrainState::new(TrainConfig {
            episodes: args.episodes,
            steps_per_episode: args.steps,
            instance_size: args.n,
            window_mode: args.mode,
            seed: args.seed,
            ..TrainConfig::default()
        })
        .map_err(anyhow::Error::from)?,
    };
    let started = Instant::now();
    let rows = state.run(args.episodes, |r| {
        if r.episode % 10 == 0 {
            println!(
                "episode {:>6}  mean return {:>9.4}  policy loss {:>10.6}  value loss {:>10.4}  clipped {:>5.2}",
                r.episode, r.mean_return, r.policy_loss, r.value_loss, r.clip_fraction
            );
        }
    })?;
    save_checkpoint(&state, &args.out)?;
    if let Some(log) = &args.log {
        let f = fs::File::create(log)?;
        write_train_log(&rows, f)?;
    }
    println!(
        "trained {} episodes in {:.1}s; checkpoint written to {}",
        rows.len(),
        started.elapsed().as_secs_f64(),
        args.out.display()
    );
    Ok(())
}
