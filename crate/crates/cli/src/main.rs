//! `climex`: batch front end for the station-to-grid extremes analysis.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use climex::changes::ChangeMetric;
use climex::simstudy::Family;

/// Exit code 1: the analysis itself failed. Exit code 2: bad usage or input.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(climex::Error),
    #[error("{0}")]
    Analysis(climex::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Analysis(_) => 1,
            _ => 2,
        }
    }
}

impl From<climex::Error> for CliError {
    fn from(e: climex::Error) -> Self {
        use climex::Error as E;
        match e {
            E::InvalidArgument(_) | E::Parse { .. } | E::DuplicateRecord { .. } | E::Io { .. } | E::Csv(_) | E::Json(_) => {
                CliError::Input(e)
            }
            _ => CliError::Analysis(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "climex", version, about = "Detect changes in seasonal precipitation extremes")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replace existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ChangeArgs {
    #[arg(long)]
    metric: Option<ChangeMetric>,
    /// Return period in seasons.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Seasonal block maxima from daily records.
    Extract {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit, krige and test every configured season.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        change: ChangeArgs,
        /// Keep completed replicates from an interrupted run.
        #[arg(long)]
        resume: bool,
    },
    /// Annual change from finished seasonal analyses.
    Annual {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        change: ChangeArgs,
    },
    /// The block-size simulation study.
    Simulate {
        /// JSON simulation settings; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<Family>>,
        #[arg(long, default_value = "sim")]
        out: PathBuf,
    },
    /// FDR decisions and field significance for precomputed z-fields.
    Fdr {
        /// Observed `lon,lat,z` file.
        #[arg(long)]
        observed: PathBuf,
        /// Directory of permutation `lon,lat,z` files.
        #[arg(long)]
        null_dir: PathBuf,
        #[arg(long = "q", value_delimiter = ',', default_values_t = climex::testing::DEFAULT_Q_LEVELS)]
        q_levels: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a kriging model to `lon,lat,value` points and predict on a grid.
    KrigingFit {
        #[arg(long)]
        points: PathBuf,
        /// Run config supplying the grid.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    let force = cli.force;
    match cli.command {
        Command::Extract { run } => commands::extract(&load(&run, None)?, force),
        Command::Analyze { run, change, resume } => commands::analyze(&load(&run, Some(&change))?, force, resume),
        Command::Annual { run, change } => commands::annual(&load(&run, Some(&change))?, force),
        Command::Simulate {
            config,
            seed,
            families,
            out,
        } => commands::simulate(config.as_deref(), seed, families, &out, force),
        Command::Fdr {
            observed,
            null_dir,
            q_levels,
            out,
        } => commands::fdr(&observed, &null_dir, &q_levels, &out, force),
        Command::KrigingFit { points, config, out } => {
            commands::kriging_fit(&points, &config::RunConfig::load(&config)?, &out, force)
        }
    }
}

fn load(run: &RunArgs, change: Option<&ChangeArgs>) -> Result<config::RunConfig, CliError> {
    let mut cfg = config::RunConfig::load(&run.config)?;
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(o) = &run.out {
        cfg.output = o.clone();
    }
    if let Some(c) = change {
        if let Some(m) = c.metric {
            cfg.metric = m;
        }
        if let Some(r) = c.r {
            cfg.r = r;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("climex: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
