//! `flock`: scenario runner for Euler-alignment flocking experiments.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdResult, Failure};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "flock", version, about = "Cucker-Smale / Motsch-Tadmor flocking hydrodynamics lab")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Scenario configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Artifact directory (overrides outputs.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the initial data, run the solver, and write artifacts.
    Run(Io),
    /// Bisect the blowup threshold of a one-parameter 1D family.
    Bisect {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        a_lo: Option<f64>,
        #[arg(long)]
        a_hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a two-parameter grid of scenarios in parallel.
    Scan(Io),
    /// Recompute the decay-rate summary of an existing run directory.
    Report {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the agent-based system sampled from the configured profiles.
    Agents(Io),
}

fn load(io: &Io) -> CmdResult<(RunConfig, String, PathBuf)> {
    let (cfg, text) = RunConfig::load(&io.config).map_err(Failure::Config)?;
    let out = io.out.clone().or_else(|| cfg.outputs.dir.clone()).ok_or_else(|| {
        Failure::Config(anyhow::anyhow!("no artifact directory: pass --out or set outputs.dir"))
    })?;
    Ok((cfg, text, out))
}

fn dispatch(cli: &Cli) -> CmdResult {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Run(io) => {
            let (cfg, text, out) = load(io)?;
            commands::run(&cfg, &text, &out, quiet)
        }
        Command::Bisect { io, a_lo, a_hi, tol } => {
            let (cfg, _, out) = load(io)?;
            commands::bisect(&cfg, &out, (*a_lo, *a_hi, *tol), quiet).map(drop)
        }
        Command::Scan(io) => {
            let (cfg, _, out) = load(io)?;
            commands::scan(&cfg, &out, quiet).map(drop)
        }
        Command::Report { out } => commands::report(Path::new(out), quiet).map(drop),
        Command::Agents(io) => {
            let (cfg, text, out) = load(io)?;
            commands::agents(&cfg, &text, &out, quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
