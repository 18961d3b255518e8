//! `walkerbell`: batch runs, sweeps, calibration and hidden-variable tables.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration
//! or validation failure.

mod experiment;
mod hvt;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use walkerbell::config::{Profile, RunConfig};
use walkerbell::Error;

#[derive(Parser)]
#[command(name = "walkerbell", version, about = "Bouncing-droplet Bell test simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults reproduce the published setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
    /// Reuse completed runs from the ledger in the output directory.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// One coupled run at settings (a, b): trajectory CSV, optional field dump, outcome record.
    Run {
        /// Run index; the seed is derived from the master seed and this.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// M(a, b) over the Δλ/L grid for each measurement time.
    SweepDlambda,
    /// M(α, α) over the barrier-depth grid.
    SweepAlpha,
    /// The four correlations of a CHSH experiment and the bound verdict.
    Chsh,
    /// Dispersion, decay, Faraday wavelength and threshold report.
    Calibrate,
    /// Probability-table operations for hidden-variable models.
    Hvt {
        #[command(subcommand)]
        op: hvt::HvtOp,
    },
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub resume: bool,
}

impl Context {
    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_context(cli: &Cli) -> walkerbell::Result<Context> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = cli.profile {
        config.profile = match p {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Desk => Profile::Desk,
        };
    }
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    config.validate()?;
    let workers = match cli.workers {
        Some(0) => return Err(config_error("workers", "must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    Ok(Context { config, out: cli.out.clone(), workers, resume: cli.resume })
}

pub fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.to_string(), reason: reason.into() }
}

pub fn ensure_dir(dir: &Path) -> walkerbell::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Table(_) | Error::Composition(_) | Error::Lookup(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

fn dispatch(cli: &Cli) -> walkerbell::Result<u8> {
    if let Command::Hvt { op } = &cli.command {
        return hvt::run(op, &cli.out);
    }
    let ctx = load_context(cli)?;
    ensure_dir(&ctx.out)?;
    match &cli.command {
        Command::Run { index } => experiment::run(&ctx, *index),
        Command::SweepDlambda => experiment::sweep_dlambda(&ctx),
        Command::SweepAlpha => experiment::sweep_alpha(&ctx),
        Command::Chsh => experiment::chsh(&ctx),
        Command::Calibrate => experiment::calibrate(&ctx),
        Command::Hvt { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
