use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qelm::experiment::{load_config, run, write_results, ExperimentConfig};

/// Photonic extreme learning machine experiments.
#[derive(Parser)]
#[command(name = "qelm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment and write its result tables.
    Run(RunArgs),
    /// Run a rank-scaling experiment.
    Rank(RunArgs),
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Precedence: this flag, then `jobs` in the config,
    /// then QELM_JOBS, then the number of available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

fn default_jobs() -> Result<usize> {
    match std::env::var("QELM_JOBS") {
        Ok(v) => v.trim().parse().with_context(|| format!("QELM_JOBS={v:?} is not a worker count")),
        Err(_) => Ok(thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn execute(args: &RunArgs, rank_only: bool) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if rank_only && !config.experiment.is_rank() {
        bail!("{}: `qelm rank` needs a rank_vs_detectors or rank_vs_photons experiment", args.config.display());
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let jobs = match args.jobs.or(config.jobs) {
        Some(j) => j,
        None => default_jobs()?,
    };
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let out = output_dir(args.out.as_deref(), &config, &args.config)?;
    log::info!("running {:?} with {jobs} worker(s) into {}", config.experiment, out.display());
    let record = run(&config, jobs)?;
    write_results(&record, &out)?;
    println!(
        "wrote {} metric rows, {} aggregates, {} fits to {} in {:.1} s",
        record.metrics.len(),
        record.aggregates.len(),
        record.fits.len(),
        out.display(),
        record.wall_clock_seconds
    );
    Ok(())
}

fn output_dir(flag: Option<&Path>, config: &ExperimentConfig, config_path: &Path) -> Result<PathBuf> {
    match (flag, &config.output) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(p)) if p.is_relative() => Ok(config_path.parent().unwrap_or(Path::new(".")).join(p)),
        (None, Some(p)) => Ok(p.clone()),
        (None, None) => bail!("no output directory: pass --out or set `output` in the config"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => execute(args, false),
        Command::Rank(args) => execute(args, true),
        Command::Validate { config } => load_config(config).map(|c| {
            println!("{}: valid {:?} experiment", config.display(), c.experiment);
        }).map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
