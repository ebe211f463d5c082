//! `herald`: simulate, analyse and fit heralded photon-pair source experiments
//! from a single TOML run configuration.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, Result};

/// Worker-count override for the thread pool.
const WORKERS_ENV: &str = "HERALD_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "herald",
    version,
    about = "Heralded photon-pair source simulation and analysis"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only report errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    config: PathBuf,

    /// Output directory; defaults to `io.output_dir` of the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run at `montecarlo.power`: time tags and a counts summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides `montecarlo.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Coincidence histograms, CAR and heralded g2 from a tag file.
    Analyze {
        /// Tag file: `.bin` for the binary format, CSV otherwise.
        tags: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Singles and coincidence rates over `sweep.powers` and the source fit.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides `montecarlo.seed` for Monte Carlo sweeps.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Model curves of CAR, rates and the g2 bands over `sweep.powers`.
    Curves {
        #[command(flatten)]
        common: Common,
    },
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, _) => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Setup(format!(
            "{WORKERS_ENV} must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Setup(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_workers()?;
    let written = match cli.command {
        Command::Simulate { common, seed } => {
            commands::simulate(&common.config, common.out.as_deref(), seed)?
        }
        Command::Analyze { tags, common } => {
            commands::analyze(&tags, &common.config, common.out.as_deref())?
        }
        Command::Sweep { common, seed } => {
            commands::sweep(&common.config, common.out.as_deref(), seed)?
        }
        Command::Curves { common } => commands::curves(&common.config, common.out.as_deref())?,
    };
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
