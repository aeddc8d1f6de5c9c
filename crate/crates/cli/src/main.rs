use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nonga_core::harness::{self, validate, Experiment, ExperimentConfig};
use nonga_core::Filter;

/// Run the data assimilation experiments and write plot-ready CSV.
#[derive(Parser, Debug)]
#[command(name = "nonga", version)]
struct Cli {
    /// Run the oracle and statistical self-checks, then exit.
    #[arg(long)]
    validate: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One analysis of a weighted bimodal prior.
    Bimodal(RunArgs),
    /// Twin experiment on the double-well SDE, scored against the grid filter.
    Doublewell(RunArgs),
    /// Indicator-conditioned random-field prior, observed at pi/2.
    SineBimodal(RunArgs),
    /// Gaussian random-field prior, observed far in its tail.
    SineFar(RunArgs),
    /// Run an experiment over many seeds and tabulate its score per filter.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    filter: Option<Filter>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat JSON file of configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Experiment to sweep.
    #[arg(default_value = "doublewell")]
    experiment: Experiment,
    /// Filters to compare; all three by default.
    #[arg(long, value_delimiter = ',')]
    filters: Vec<Filter>,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>, experiment: Experiment) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = experiment;
    Ok(cfg)
}

fn run_one(experiment: Experiment, args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref(), experiment)?;
    if let Some(f) = args.filter {
        cfg.filter = f;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("out/{}-{}-{}", cfg.experiment, cfg.filter, cfg.seed)));
    cfg.output_dir = Some(out.display().to_string());
    let report = harness::run(&cfg)?;
    report.write_to(&out)?;
    for w in &report.summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    println!("wrote {}", out.display());
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.experiment)?;
    let filters = if args.filters.is_empty() { Filter::ALL.to_vec() } else { args.filters };
    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let rows = harness::sweep(&cfg, &filters, &seeds)?;
    let metric = harness::sweep_metric(args.experiment);
    let out = args.out.unwrap_or_else(|| PathBuf::from(format!("out/sweep-{}", args.experiment)));
    std::fs::create_dir_all(&out)?;
    harness::write_sweep_csv(&out.join("sweep.csv"), metric, &rows)?;
    println!("{:<10} median {metric}", "filter");
    for (f, m) in harness::sweep_medians(&rows, &filters) {
        println!("{:<10} {m:.6}", f.as_str());
    }
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}

fn run_validate() -> Result<bool> {
    let checks = validate::self_checks(0)?;
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = (|| -> Result<bool> {
        if cli.validate {
            let ok = run_validate()?;
            if cli.command.is_none() || !ok {
                return Ok(ok);
            }
        }
        match cli.command {
            Some(Command::Bimodal(a)) => run_one(Experiment::Bimodal, a)?,
            Some(Command::Doublewell(a)) => run_one(Experiment::DoubleWell, a)?,
            Some(Command::SineBimodal(a)) => run_one(Experiment::SineBimodal, a)?,
            Some(Command::SineFar(a)) => run_one(Experiment::SineFar, a)?,
            Some(Command::Sweep(a)) => run_sweep(a)?,
            None => bail!("nothing to do; pass an experiment, `sweep`, or --validate"),
        }
        Ok(true)
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
