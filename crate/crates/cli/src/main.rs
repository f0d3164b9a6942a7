//! `tofmcl`: simulate datasets, run localization batches, summarize them and
//! benchmark the filter.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tof_mcl::run::SensorSet;
use tof_mcl::NumericPolicy;

use crate::config::Config;
use crate::error::CliError;

/// Default directory for datasets and reports.
pub const DATA_DIR_ENV: &str = "TOFMCL_DATA_DIR";

#[derive(Parser, Debug)]
#[command(name = "tofmcl", version, about = "Monte Carlo localization with multizone ToF sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate built-in sequences into a dataset directory.
    Simulate(SimulateArgs),
    /// Run the filter over a dataset and write one CSV row per run.
    Localize(LocalizeArgs),
    /// Summarize run CSVs per configuration.
    Eval(EvalArgs),
    /// Time the filter steps and tabulate memory use.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML experiment config; unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in world.
    #[arg(long)]
    world: Option<String>,
    /// Sequence names, comma separated.
    #[arg(long = "seq", value_delimiter = ',')]
    sequences: Option<Vec<String>>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum Format {
    #[default]
    Jsonl,
    Binary,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Output directory.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LocalizeArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset directory written by `simulate`.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    data: PathBuf,
    /// Particle counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    particles: Option<Vec<usize>>,
    /// fp32, fp32qm or fp16qm; comma separated for a sweep.
    #[arg(long, value_delimiter = ',')]
    policy: Option<Vec<NumericPolicy>>,
    /// both or front.
    #[arg(long, value_delimiter = ',')]
    sensors: Option<Vec<SensorSet>>,
    /// Worker threads per filter.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV; defaults to runs.csv in the dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Run CSVs written by `localize`.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Summary CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Convergence probability over time, long-format CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Sequence length for the curve, seconds.
    #[arg(long, default_value_t = tof_mcl::sim::BUILTIN_DURATION)]
    duration: f64,
    /// Tick rate for the curve, Hz.
    #[arg(long, default_value_t = tof_mcl::sim::BUILTIN_RATE_HZ)]
    rate: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// TOML config; only `[bench]` is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Particle counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    particles: Option<Vec<usize>>,
    /// Worker counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    #[arg(long)]
    policy: Option<NumericPolicy>,
    /// Untimed steps before measuring, at least 3.
    #[arg(long)]
    warmup: Option<usize>,
    /// Timed steps per cell, at least 30.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory for the CSVs.
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

fn load(path: &Option<PathBuf>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

impl Common {
    /// Config file with the flags applied on top.
    fn resolve(&self) -> Result<Config, CliError> {
        let mut c = load(&self.config)?;
        if let Some(w) = &self.world {
            c.world.name = w.clone();
        }
        if let Some(s) = &self.sequences {
            c.experiment.sequences = s.clone();
        }
        if let Some(s) = &self.seeds {
            c.experiment.seeds = s.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let config = a.common.resolve()?;
            commands::simulate(&config, a.format, &a.out)
        }
        Command::Localize(a) => {
            let mut config = a.common.resolve()?;
            if let Some(p) = a.particles {
                config.experiment.particles = p;
            }
            if let Some(p) = a.policy {
                config.experiment.policies = p;
            }
            if let Some(s) = a.sensors {
                config.experiment.sensors = s;
            }
            if let Some(w) = a.workers {
                config.filter.workers = w;
            }
            config.validate()?;
            let selection = commands::Selection {
                sequences: a.common.sequences,
                seeds: a.common.seeds,
            };
            let out = a.out.unwrap_or_else(|| a.data.join("runs.csv"));
            commands::localize(&config, &selection, &a.data, &out)
        }
        Command::Eval(a) => commands::eval(&a.runs, a.out.as_deref(), a.curve.as_deref(), a.duration, a.rate),
        Command::Bench(a) => {
            let mut config = load(&a.config)?;
            let b = &mut config.bench;
            if let Some(p) = a.particles {
                b.particles = p;
            }
            if let Some(w) = a.workers {
                b.workers = w;
            }
            if let Some(p) = a.policy {
                b.policy = p;
            }
            if let Some(w) = a.warmup {
                b.warmup = w;
            }
            if let Some(r) = a.reps {
                b.repetitions = r;
            }
            config.validate()?;
            commands::bench(&config, &a.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tofmcl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
