//! Batch front end: parse a JSON run config, execute one pipeline, write
//! machine-readable results.
//!
//! Exit codes: 0 success, 1 numerical failure (non-convergence, failed
//! check, lost domination), 2 usage or config error. Result files carry no
//! timestamps; identical configs produce identical bytes.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "varmin", version, about = "Discrete action minimization runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the discrete action of the configured problem.
    Solve(RunArgs),
    /// Grid-refinement study: solve on K0, 2 K0, ... and measure polygon
    /// convergence.
    Converge(RunArgs),
    /// Check model conditions, transform round-trips, and gradient
    /// consistency.
    Verify(RunArgs),
    /// Smooth an input curve at several radii and compare actions against a
    /// minimizer.
    Mollify(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a) | Command::Converge(a) | Command::Verify(a) | Command::Mollify(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run config.
    #[arg(short, long)]
    config: PathBuf,

    /// Output base path; the artifact extension is appended. Defaults to the
    /// config path with `.out` in place of its extension.
    #[arg(short, long)]
    out: Option<PathBuf>,

    /// Which artifacts to write (solve and converge only).
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Suppress the human-readable summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<u8> {
    let cli = Cli::parse();
    init_thread_pool()?;

    let args = cli.command.args();
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let config: config::RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", args.config.display()))?;
    config.validate()?;

    match &cli.command {
        Command::Solve(a) => commands::solve(&config, a),
        Command::Converge(a) => commands::converge(&config, a),
        Command::Verify(a) => commands::verify(&config, a),
        Command::Mollify(a) => commands::mollify(&config, a),
    }
}

/// VARMIN_THREADS caps the rayon pool; 0 or unset leaves the default.
fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("VARMIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("VARMIN_THREADS must be a non-negative integer, got '{raw}'"))?;
    if n == 0 {
        return Ok(());
    }
    if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        bail!("building the thread pool: {err}");
    }
    Ok(())
}
