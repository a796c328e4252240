use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use splitlab::runner::{self, estimate_peak_bytes, ExperimentConfig, RunOptions, Task};
use splitlab::Error;

#[derive(Parser)]
#[command(name = "splitlab", version, about = "Exact-diagonalization experiments on spin and fermion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (sweep concurrency, or the thread pool of a single run).
    #[arg(long)]
    parallel: Option<usize>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Reuse an existing record with the same config digest (default).
    #[arg(long, overrides_with = "no_cache")]
    cache: bool,
    /// Always recompute.
    #[arg(long = "no-cache")]
    no_cache: bool,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Dotted config path to vary, e.g. `model.delta`.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated values for the axis.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state energies, gap and degeneracy.
    Gap(Common),
    /// Connected correlators, decay fit and correlation brackets.
    Corr(Common),
    /// Lieb-Robinson commutator surface and light-cone fit.
    Lr(Common),
    /// Bell constant of the ground state across two windows.
    Bell(Common),
    /// Split-property diagnostics of the ground state.
    Split(Common),
    /// Runs one task over a list of values of a config entry.
    Sweep(SweepArgs),
    /// Checks a config and prints its digest and memory estimate.
    Validate(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceCap { .. } | Error::DimensionCap { .. } => 3,
        Error::NonConvergence { .. } | Error::StepUnderflow(_) => 4,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        _ => 2,
    }
}

fn load(common: &Common, task: Option<Task>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(task) = task {
        if cfg.task != task {
            warn!("config task {:?} replaced by the {:?} subcommand", cfg.task, task);
            cfg.task = task;
            cfg.validate()?;
        }
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn options(common: &Common) -> RunOptions {
    RunOptions { use_cache: !common.no_cache, persist: true }
}

fn with_threads<T: Send>(n: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    match n {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(e.to_string())),
        None => Ok(f()),
    }
}

fn execute(command: Command) -> Result<(), Error> {
    let (common, task) = match &command {
        Command::Gap(c) => (c, Task::Gap),
        Command::Corr(c) => (c, Task::Corr),
        Command::Lr(c) => (c, Task::Lr),
        Command::Bell(c) => (c, Task::Bell),
        Command::Split(c) => (c, Task::Split),
        Command::Sweep(s) => (&s.common, Task::Sweep),
        Command::Validate(c) => {
            let cfg = load(c, None)?;
            let needed = estimate_peak_bytes(&cfg)?;
            println!("config ok: task {:?}, digest {}", cfg.task, cfg.digest()?);
            println!("estimated peak memory {needed} bytes (cap {})", cfg.memory_cap_bytes);
            if needed > cfg.memory_cap_bytes {
                return Err(Error::ResourceCap { needed, cap: cfg.memory_cap_bytes });
            }
            return Ok(());
        }
    };
    if let Command::Sweep(args) = &command {
        let cfg = load(common, None)?;
        let (axis, values) = match (&args.axis, &args.values) {
            (Some(a), Some(v)) => (a.clone(), v.clone()),
            (None, None) if cfg.task == Task::Sweep => {
                let p: runner::SweepParams = toml::Value::Table(cfg.task_parameters.clone())
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
                (p.axis, p.values)
            }
            _ => return Err(Error::Config("sweep needs both --axis and --values, or a sweep config".into())),
        };
        let parallelism = common.parallel.unwrap_or(1);
        let (records, index) = runner::sweep(&cfg, &axis, &values, parallelism, options(common))?;
        println!("{}", serde_json::to_string_pretty(&index)?);
        eprintln!("{} of {} runs succeeded", records.len(), index.entries.len());
        return Ok(());
    }
    let cfg = load(common, Some(task))?;
    let opts = options(common);
    let record = with_threads(common.parallel, || runner::run(&cfg, opts))??;
    println!("{}", serde_json::to_string_pretty(&record)?);
    eprintln!("record: {}", runner::record_path(&cfg, &record.config_digest).display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
