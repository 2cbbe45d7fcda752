//! `rush` — synthetic-bench generation, scheduler runs, paired comparisons,
//! budget sweeps, and verification of the sufficient-budget bound.
//!
//! All randomness flows from explicit `--seed` flags; reruns with identical
//! flags produce byte-identical outputs, for any `--jobs` value. `RUSH_LOG`
//! controls log verbosity only and never affects results.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rush_core::benchgen::{
    generate_family, invert_task, load_bench, save_bench_with_meta, CostModel, CurveModel,
    FamilySpec,
};
use rush_core::harness::report::{
    sequence_summary, write_comparison_csv, write_records_csv, write_sweep_csv,
};
use rush_core::harness::{
    budget_sweep, compare, run_sequence, SchedulerKind, SequenceSpec,
};
use rush_core::schedulers::{bracket_equivalent_budget, SchedulerConfig};
use rush_core::theory::verify::{run_verification, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "rush",
    about = "Successive halving with incumbent carry-over on tabular benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark family
    Gen(GenArgs),
    /// Run one scheduler over task sequences
    Run(RunArgs),
    /// Paired comparison of two schedulers on identical sequences
    Compare(CompareArgs),
    /// Paired candidate-vs-baseline runs over a budget grid
    Sweep(SweepArgs),
    /// Check the sufficient-budget bound on random instances
    VerifyTheorem(VerifyArgs),
    /// Pretty-print a JSON summary produced by run/compare/sweep/verify-theorem
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Geometric,
    PowerLaw,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Constant,
    Lognormal,
    HeavyTailed,
}

#[derive(Args)]
struct GenArgs {
    /// Arms per task (shared ids across the family)
    #[arg(long)]
    arms: usize,
    /// Pulls tabulated per arm
    #[arg(long)]
    horizon: usize,
    /// Tasks in the family
    #[arg(long)]
    tasks: usize,
    /// Cross-task relatedness in [0, 1]; 1 = identical limit ranking
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Geometric)]
    model: ModelArg,
    /// Relative curve noise in [0, 1); 0 = exact closed form
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Range of limits across arms, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    #[arg(long, value_enum, default_value_t = CostArg::Constant)]
    cost: CostArg,
    /// Constant value / lognormal location / heavy-tail scale base
    #[arg(long, default_value_t = 1.0)]
    cost_location: f64,
    #[arg(long, default_value_t = 1.0)]
    cost_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit the 1−loss twin of every task
    #[arg(long)]
    invert: bool,
    /// Output bench file
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ProtocolArgs {
    /// Bench file produced by `gen` (or converted to its schema)
    #[arg(long)]
    bench: PathBuf,
    /// Halving rate
    #[arg(long, default_value_t = 3)]
    eta: u32,
    /// Pull budget per task for sh/rush; defaults to one hyperband bracket,
    /// (s_max+1)·R, when --max-resource is given
    #[arg(long)]
    budget: Option<u64>,
    /// Max per-arm resource R (required for hb/hb-rush)
    #[arg(long)]
    max_resource: Option<u64>,
    /// Tasks per sequence
    #[arg(long, default_value_t = 20)]
    sequence_length: usize,
    /// Independent sequence repetitions
    #[arg(long, default_value_t = 25)]
    repetitions: usize,
    /// New arms sampled per task (default: every arm of the task)
    #[arg(long)]
    arms_per_task: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Incumbent store capacity (unlimited when omitted)
    #[arg(long)]
    incumbent_cap: Option<usize>,
    /// Worker threads for repetitions; results are identical for any value
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_scheduler)]
    scheduler: SchedulerKind,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_parser = parse_scheduler)]
    baseline: SchedulerKind,
    #[arg(long, value_parser = parse_scheduler)]
    candidate: SchedulerKind,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_scheduler)]
    scheduler: SchedulerKind,
    /// Ascending budgets, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<u64>,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 12)]
    max_arms: usize,
    #[arg(long, default_value_t = 3)]
    eta: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON summary to render
    #[arg(long)]
    input: PathBuf,
}

fn parse_scheduler(s: &str) -> Result<SchedulerKind, String> {
    s.parse()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter("RUSH_LOG")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::VerifyTheorem(args) => cmd_verify_theorem(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let curve_model = match args.model {
        ModelArg::Geometric => CurveModel::Geometric { noise: args.noise },
        ModelArg::PowerLaw => CurveModel::PowerLaw { noise: args.noise },
    };
    let cost = match args.cost {
        CostArg::Constant => CostModel::Constant {
            value: args.cost_location,
        },
        CostArg::Lognormal => CostModel::Lognormal {
            location: args.cost_location,
            scale: args.cost_scale,
        },
        CostArg::HeavyTailed => CostModel::HeavyTailed {
            location: args.cost_location,
            scale: args.cost_scale,
        },
    };
    let spec = FamilySpec {
        n_arms: args.arms,
        horizon: args.horizon,
        n_tasks: args.tasks,
        curve_model,
        limit_spread: args.spread,
        relatedness: args.rho,
        seed: args.seed,
    };
    let mut tasks = generate_family(&spec, &cost)?;
    if args.invert {
        // interleave each task with its twin
        let mut doubled = Vec::with_capacity(tasks.len() * 2);
        for task in tasks {
            let twin = invert_task(&task)?;
            doubled.push(task);
            doubled.push(twin);
        }
        tasks = doubled;
    }
    let meta = serde_json::json!({
        "generator": "rush gen",
        "family_spec": spec,
        "cost_model": cost,
        "invert": args.invert,
    });
    save_bench_with_meta(&tasks, Some(meta), &args.out)?;
    log::info!("wrote {} tasks to {}", tasks.len(), args.out.display());
    println!(
        "wrote {} tasks ({} arms, horizon {}) to {}",
        tasks.len(),
        args.arms,
        args.horizon,
        args.out.display()
    );
    Ok(())
}

/// Resolves flags into a harness spec plus the self-describing config object
/// embedded in every JSON summary (jobs excluded: execution-only knob).
fn build_spec(
    protocol: &ProtocolArgs,
    scheduler: SchedulerKind,
) -> Result<(SequenceSpec, serde_json::Value)> {
    let bench = load_bench(&protocol.bench)
        .with_context(|| format!("loading bench {}", protocol.bench.display()))?;
    if bench.is_empty() {
        bail!("bench {} contains no tasks", protocol.bench.display());
    }
    let min_arms = bench.iter().map(|t| t.arm_count()).min().unwrap();
    let arms_per_task = protocol.arms_per_task.unwrap_or(min_arms);
    let budget = match (protocol.budget, protocol.max_resource) {
        (Some(b), _) => b,
        (None, Some(r)) => bracket_equivalent_budget(r, protocol.eta),
        (None, None) => {
            if scheduler.is_hyperband() {
                bail!("{scheduler} needs --max-resource");
            }
            bail!("{scheduler} needs --budget (or --max-resource to derive it)");
        }
    };
    if scheduler.is_hyperband() && protocol.max_resource.is_none() {
        bail!("{scheduler} needs --max-resource");
    }
    let mut cfg = SchedulerConfig::new(protocol.eta, budget);
    cfg.incumbent_cap = protocol.incumbent_cap;
    let config = serde_json::json!({
        "bench": protocol.bench.display().to_string(),
        "bench_tasks": bench.len(),
        "scheduler": scheduler,
        "eta": protocol.eta,
        "budget": budget,
        "max_resource": protocol.max_resource,
        "sequence_length": protocol.sequence_length,
        "repetitions": protocol.repetitions,
        "arms_per_task": arms_per_task,
        "permutation_seed": protocol.seed,
        "incumbent_cap": protocol.incumbent_cap,
    });
    let spec = SequenceSpec {
        bench,
        sequence_length: protocol.sequence_length,
        repetitions: protocol.repetitions,
        permutation_seed: protocol.seed,
        scheduler,
        cfg,
        arms_per_task,
        max_resource: protocol.max_resource,
    };
    Ok((spec, config))
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    Ok(pool.install(f))
}

fn write_json(path: &PathBuf, value: &serde_json::Value) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (spec, config) = build_spec(&args.protocol, args.scheduler)?;
    let report = in_pool(args.protocol.jobs, || run_sequence(&spec))??;
    if let Some(path) = &args.out_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_records_csv(BufWriter::new(file), &report.records)?;
    }
    if let Some(path) = &args.out_json {
        let summary = serde_json::json!({
            "command": "run",
            "config": config,
            "results": sequence_summary(&report),
        });
        write_json(path, &summary)?;
    }
    println!(
        "{}: {} repetitions x {} tasks | mean regret {:.6} (std {:.6}) | total pulls {} | sim time {:.3}",
        report.scheduler,
        report.repetitions.len(),
        spec.sequence_length,
        report.mean_cumulative_regret,
        report.std_cumulative_regret,
        report.total_pulls,
        report.total_sim_time,
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let (base_spec, config) = build_spec(&args.protocol, args.baseline)?;
    let mut cand_spec = base_spec.clone();
    cand_spec.scheduler = args.candidate;
    let cmp = in_pool(args.protocol.jobs, || compare(&base_spec, &cand_spec))??;
    if let Some(path) = &args.out_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_comparison_csv(BufWriter::new(file), &cmp)?;
    }
    if let Some(path) = &args.out_json {
        let summary = serde_json::json!({
            "command": "compare",
            "config": config,
            "baseline_scheduler": args.baseline,
            "candidate_scheduler": args.candidate,
            "results": cmp,
        });
        write_json(path, &summary)?;
    }
    println!(
        "{} vs {}: time reduction {:.3}% | regret delta {:+.6} | pulls {} -> {}",
        args.candidate,
        args.baseline,
        cmp.time_reduction_pct,
        cmp.regret_delta,
        cmp.baseline.total_pulls,
        cmp.candidate.total_pulls,
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    // the per-row budgets drive the runs; the first seeds spec resolution
    let mut protocol = args.protocol.clone();
    if protocol.budget.is_none() {
        protocol.budget = args.budgets.first().copied();
    }
    let (spec, mut config) = build_spec(&protocol, args.scheduler)?;
    if let Some(obj) = config.as_object_mut() {
        obj.remove("budget");
    }
    let sweep = in_pool(args.protocol.jobs, || budget_sweep(&spec, &args.budgets))??;
    if let Some(path) = &args.out_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_sweep_csv(BufWriter::new(file), &sweep)?;
    }
    if let Some(path) = &args.out_json {
        let summary = serde_json::json!({
            "command": "sweep",
            "config": config,
            "budgets": args.budgets,
            "results": sweep,
        });
        write_json(path, &summary)?;
    }
    for row in &sweep.rows {
        match (&row.candidate_mean_regret, &row.error) {
            (Some(r), _) => println!(
                "budget {:>8}: {} regret {:.6} | {} regret {:.6} | time reduction {:.3}%",
                row.budget,
                sweep.candidate,
                r,
                sweep.baseline,
                row.baseline_mean_regret.unwrap(),
                row.time_reduction_pct.unwrap()
            ),
            (None, Some(e)) => println!("budget {:>8}: error: {e}", row.budget),
            _ => unreachable!("sweep rows carry a result or an error"),
        }
    }
    Ok(())
}

fn cmd_verify_theorem(args: VerifyArgs) -> Result<()> {
    let cfg = VerifyConfig {
        instances: args.instances,
        max_arms: args.max_arms,
        eta: args.eta,
        seed: args.seed,
    };
    let report = run_verification(&cfg)?;
    for regime in &report.regimes {
        println!(
            "{:>10?}: {}/{} correct",
            regime.regime,
            regime.successes,
            regime.successes + regime.failures
        );
    }
    if !report.failures.is_empty() {
        for f in &report.failures {
            println!(
                "  failure: instance {} regime {:?} n={} budget={} expected {} got {}",
                f.instance, f.regime, f.n, f.budget, f.expected, f.selected
            );
        }
    }
    println!(
        "budgets ranged {}..={} | overall {}",
        report.min_budget,
        report.max_budget,
        if report.all_correct { "ok" } else { "FAILED" }
    );
    if let Some(path) = &args.out_json {
        let summary = serde_json::json!({
            "command": "verify-theorem",
            "config": cfg,
            "results": report,
        });
        write_json(path, &summary)?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let command = value
        .get("command")
        .and_then(|c| c.as_str())
        .unwrap_or("unknown");
    let results = value.get("results").unwrap_or(&serde_json::Value::Null);
    println!("== {command} summary ({}) ==", args.input.display());
    if let Some(config) = value.get("config") {
        if let Some(obj) = config.as_object() {
            let keys: BTreeSet<&String> = obj.keys().collect();
            let line: Vec<String> = keys
                .iter()
                .map(|k| format!("{k}={}", compact(&obj[k.as_str()])))
                .collect();
            println!("config: {}", line.join(" "));
        }
    }
    match command {
        "run" => {
            for key in [
                "mean_cumulative_regret",
                "std_cumulative_regret",
                "total_pulls",
                "total_sim_time",
            ] {
                if let Some(v) = results.get(key) {
                    println!("{key:>24}: {}", compact(v));
                }
            }
            if let Some(cpl) = results.get("candidates_per_level") {
                if let (Some(levels), Some(means)) = (
                    cpl.get("levels").and_then(|v| v.as_array()),
                    cpl.get("per_task_mean").and_then(|v| v.as_array()),
                ) {
                    println!("{:>24}: level -> mean candidates per task", "candidates");
                    for (l, m) in levels.iter().zip(means.iter()) {
                        println!("{:>24}  {:>8} -> {}", "", compact(l), compact(m));
                    }
                }
            }
        }
        "compare" => {
            for key in ["time_reduction_pct", "regret_delta"] {
                if let Some(v) = results.get(key) {
                    println!("{key:>24}: {}", compact(v));
                }
            }
            for side in ["baseline", "candidate"] {
                if let Some(agg) = results.get(side) {
                    println!(
                        "{side:>24}: regret {} (std {}), pulls {}, sim time {}",
                        compact(&agg["mean_cumulative_regret"]),
                        compact(&agg["std_cumulative_regret"]),
                        compact(&agg["total_pulls"]),
                        compact(&agg["total_sim_time"]),
                    );
                }
            }
        }
        "sweep" => {
            if let Some(rows) = results.get("rows").and_then(|v| v.as_array()) {
                for row in rows {
                    println!(
                        "{:>24}: candidate {} baseline {} time reduction {} error {}",
                        compact(&row["budget"]),
                        compact(&row["candidate_mean_regret"]),
                        compact(&row["baseline_mean_regret"]),
                        compact(&row["time_reduction_pct"]),
                        compact(&row["error"]),
                    );
                }
            }
        }
        "verify-theorem" => {
            if let Some(regimes) = results.get("regimes").and_then(|v| v.as_array()) {
                for regime in regimes {
                    println!(
                        "{:>24}: {}/{} correct",
                        compact(&regime["regime"]),
                        compact(&regime["successes"]),
                        regime["successes"].as_u64().unwrap_or(0)
                            + regime["failures"].as_u64().unwrap_or(0),
                    );
                }
            }
        }
        other => {
            println!("(unrecognized summary kind `{other}`; raw results follow)");
            println!("{}", serde_json::to_string_pretty(results)?);
        }
    }
    Ok(())
}

fn compact(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
