//! `olsb-sim`: experiment orchestration for the routing simulator.
//!
//! Subcommands:
//! - `run`        execute a sweep from a JSON experiment config
//! - `validate`   check an experiment config (exit 3 on a bad field)
//! - `bound`      evaluate the per-flow regret upper bound for a run
//! - `reproduce`  run the canonical light/moderate/high-load suites
//!
//! CLI flags override config fields; `OLSB_SIM_*` environment variables
//! override flags (for CI).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use olsb_core::analytics;
use olsb_core::config::{AckMode, Algorithm, ExperimentSpec};
use olsb_core::error::Error;
use olsb_core::sweep;

#[derive(Debug, Parser)]
#[command(name = "olsb-sim", about = "Time-slotted multihop routing simulator", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run every point of an experiment sweep and write artifacts.
    Run(RunArgs),
    /// Validate an experiment config and print the resolved sweep size.
    Validate(ValidateArgs),
    /// Evaluate the regret upper bound for a finished run directory.
    Bound(BoundArgs),
    /// Run the canonical experiment suite (three load regimes, all
    /// algorithms) and emit figure-ready tables.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long, env = "OLSB_SIM_CONFIG")]
    config: PathBuf,
    /// Override: slot horizon.
    #[arg(long, env = "OLSB_SIM_SLOTS")]
    slots: Option<u64>,
    /// Override: run seeds 1..=N.
    #[arg(long, env = "OLSB_SIM_SEEDS")]
    seeds: Option<u64>,
    /// Override: comma-separated K values.
    #[arg(long, env = "OLSB_SIM_K", value_delimiter = ',')]
    k: Option<Vec<f64>>,
    /// Override: comma-separated arrival rates.
    #[arg(long, env = "OLSB_SIM_LAMBDA", value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Override: comma-separated algorithms (olsb|backpressure|aspr|ucb1).
    #[arg(long, env = "OLSB_SIM_ALGORITHM", value_delimiter = ',')]
    algorithm: Option<Vec<String>>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long, env = "OLSB_SIM_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, env = "OLSB_SIM_OUT", default_value = "runs")]
    out: PathBuf,
    /// Override: metrics sampling stride.
    #[arg(long, env = "OLSB_SIM_STRIDE")]
    stride: Option<u64>,
    /// Override: ack mode (instant|per_hop).
    #[arg(long, env = "OLSB_SIM_ACK_MODE")]
    ack_mode: Option<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// A run point directory containing summary.json.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Directory holding the canonical experiment configs.
    #[arg(long, default_value = "configs")]
    configs: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "runs/reproduce")]
    out: PathBuf,
    /// Seeds 1..=N per point.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Slot horizon per run.
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Bound(args) => cmd_bound(args),
        Cmd::Reproduce(args) => cmd_reproduce(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_USAGE,
        Error::Config { .. } | Error::Topology(_) | Error::Json(_) | Error::NoPath { .. } => {
            EXIT_INVALID
        }
        _ => 1,
    }
}

fn apply_overrides(spec: &mut ExperimentSpec, args: &RunArgs) -> Result<(), Error> {
    if let Some(slots) = args.slots {
        spec.slots = slots;
    }
    if let Some(n) = args.seeds {
        spec.seeds = (1..=n).collect();
    }
    if let Some(k) = &args.k {
        spec.k = k.clone();
    }
    if let Some(lambda) = &args.lambda {
        spec.lambda = lambda.clone();
    }
    if let Some(names) = &args.algorithm {
        let mut algos = Vec::new();
        for name in names {
            algos.push(
                Algorithm::parse(name)
                    .ok_or_else(|| Error::config("algorithm", format!("unknown `{name}`")))?,
            );
        }
        spec.algorithms = algos;
    }
    if let Some(stride) = args.stride {
        spec.stride = stride;
    }
    if let Some(mode) = &args.ack_mode {
        spec.ack_mode = AckMode::parse(mode)
            .ok_or_else(|| Error::config("ack_mode", format!("unknown `{mode}`")))?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let mut spec = ExperimentSpec::load(&args.config)?;
    apply_overrides(&mut spec, &args)?;
    run_spec(&spec, &args.out, args.workers)
}

fn run_spec(spec: &ExperimentSpec, out: &Path, workers: Option<usize>) -> Result<(), Error> {
    let configs = spec.expand()?;
    eprintln!("{}: {} run points", spec.name, configs.len());
    let artifacts = sweep::run_all(&configs, workers)?;
    let mut summaries = Vec::with_capacity(artifacts.len());
    for artifact in &artifacts {
        let dir = sweep::write_artifact(out, artifact)?;
        let s = &artifact.summary;
        println!(
            "{}\tdelivered={}\tavg_delay_us={}\tavg_queue={:.3}\tregret={:.3}",
            dir.display(),
            s.counters.delivered,
            s.avg_delay_us.map_or("NA".into(), |d| format!("{d:.1}")),
            s.avg_queue_len,
            s.regret_total,
        );
        summaries.push(artifact.summary.clone());
    }
    let groups = sweep::write_aggregate(out, &summaries)?;
    for g in &groups {
        println!(
            "aggregate\t{}\tk={}\tlambda={}\truns={}\tdelay={}\tqueue={:.3}±{:.3}\tregret={:.2}±{:.2}",
            g.algorithm,
            g.k,
            g.lambda,
            g.runs,
            g.avg_delay_us_mean.map_or("NA".into(), |d| format!(
                "{d:.1}±{:.1}",
                g.avg_delay_us_stderr.unwrap_or(0.0)
            )),
            g.avg_queue_len_mean,
            g.avg_queue_len_stderr,
            g.regret_mean,
            g.regret_stderr,
        );
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Error> {
    let spec = ExperimentSpec::load(&args.config)?;
    let (graph, _) = spec.validate()?;
    let points = spec.k.len() * spec.lambda.len() * spec.seeds.len() * spec.algorithms.len();
    println!(
        "ok: {} ({} nodes, {} links, {} flows, {} sweep points)",
        spec.name,
        graph.n_nodes(),
        graph.n_links(),
        spec.flows.len(),
        points
    );
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<(), Error> {
    let summary = sweep::read_summary(&args.run)?;
    let reports = analytics::bound_reports(&summary);
    let json = serde_json::to_string_pretty(&reports)?;
    sweep::write_atomic(&args.run.join("bound.json"), json.as_bytes())?;
    for (flow, rep) in reports.iter().enumerate() {
        println!(
            "flow {flow}: L={} bound_as_printed={:.3} bound_clamped={:.3}",
            rep.l, rep.bound_as_printed, rep.bound_clamped
        );
    }
    println!("wrote {}", args.run.join("bound.json").display());
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<(), Error> {
    for regime in ["paper_light", "paper_moderate", "paper_high"] {
        let path = args.configs.join(format!("{regime}.json"));
        let mut spec = ExperimentSpec::load(&path)?;
        spec.seeds = (1..=args.seeds).collect();
        if let Some(slots) = args.slots {
            spec.slots = slots;
        }
        let out = args.out.join(regime);
        run_spec(&spec, &out, args.workers)?;
        write_figure_tables(&spec, &out)?;
    }
    Ok(())
}

/// Emits plot-ready tables per regime: a delay/queue summary per
/// (algorithm, K), and the seed-averaged normalized-regret series for the
/// learning algorithm at each K.
fn write_figure_tables(spec: &ExperimentSpec, out: &Path) -> Result<(), Error> {
    let configs = spec.expand()?;
    let mut summaries = Vec::new();
    let mut series_acc: std::collections::BTreeMap<String, Vec<Vec<(u64, f64)>>> =
        Default::default();
    for config in &configs {
        let dir = out.join(config.point_name());
        summaries.push(sweep::read_summary(&dir)?);
        if config.algorithm == Algorithm::Olsb {
            let path = dir.join("metrics.csv");
            let csv = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let mut series = Vec::new();
            for line in csv.lines().skip(1) {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() < 4 {
                    continue;
                }
                let slot: u64 = cells[0].parse().unwrap_or(0);
                if let Ok(v) = cells[3].parse::<f64>() {
                    series.push((slot, v));
                }
            }
            series_acc
                .entry(format!("k{}", config.k))
                .or_default()
                .push(series);
        }
    }

    let groups = analytics::summarize_groups(&summaries);
    let mut table = String::from(
        "algorithm,k,lambda,runs,avg_delay_us_mean,avg_delay_us_stderr,avg_queue_len_mean,avg_queue_len_stderr,shortest_level_queue_mean,regret_mean\n",
    );
    for g in &groups {
        table.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            g.algorithm,
            g.k,
            g.lambda,
            g.runs,
            g.avg_delay_us_mean.map_or("NA".into(), |v| format!("{v:.3}")),
            g.avg_delay_us_stderr.map_or("NA".into(), |v| format!("{v:.3}")),
            g.avg_queue_len_mean,
            g.avg_queue_len_stderr,
            g.shortest_level_queue_mean,
            g.regret_mean,
        ));
    }
    sweep::write_atomic(&out.join("figure_delay_queue.csv"), table.as_bytes())?;

    // Seed-averaged R_t / ln t per K, wide format.
    let mut regret_series: Vec<(String, Vec<(u64, f64)>)> = Vec::new();
    for (key, runs) in series_acc {
        let len = runs.iter().map(Vec::len).min().unwrap_or(0);
        let mut avg = Vec::with_capacity(len);
        for i in 0..len {
            let slot = runs[0][i].0;
            let mean = runs.iter().map(|r| r[i].1).sum::<f64>() / runs.len() as f64;
            avg.push((slot, mean));
        }
        regret_series.push((key, avg));
    }
    if !regret_series.is_empty() {
        let mut csv = String::from("slot");
        for (key, _) in &regret_series {
            csv.push(',');
            csv.push_str(key);
        }
        csv.push('\n');
        let len = regret_series.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
        for i in 0..len {
            csv.push_str(&regret_series[0].1[i].0.to_string());
            for (_, series) in &regret_series {
                csv.push_str(&format!(",{:.6}", series[i].1));
            }
            csv.push('\n');
        }
        sweep::write_atomic(&out.join("figure_regret_over_ln_t.csv"), csv.as_bytes())?;
    }
    Ok(())
}
