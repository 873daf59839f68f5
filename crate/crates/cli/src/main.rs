use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ftlab::commands::{self, Outcome};
use ftlab::config::RunConfig;
use ftlab::{Error, Result};

/// Front tracking laboratory for 1-D Lagrangian gas dynamics.
#[derive(Debug, Parser)]
#[command(name = "ftlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured Riemann problem and tabulate its fan.
    Riemann(Common),
    /// Run the front tracking scheme on the configured initial data.
    Evolve(Common),
    /// Run the randomized validation suite.
    Validate(Common),
    /// Measure the L1 distance between perturbed and clean solutions.
    Holder(Common),
    /// Calibrate the numerical constants and write them to a ledger.
    Calibrate(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(short, long)]
    jobs: Option<usize>,
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let (c, f): (&Common, fn(&RunConfig) -> Result<Outcome>) = match &cli.command {
        Command::Riemann(c) => (c, commands::cmd_riemann),
        Command::Evolve(c) => (c, commands::cmd_evolve),
        Command::Validate(c) => (c, commands::cmd_validate),
        Command::Holder(c) => (c, commands::cmd_holder),
        Command::Calibrate(c) => (c, commands::cmd_calibrate),
    };
    let cfg = load(c)?;
    if let Some(n) = c.jobs {
        rayon_pool(n)?;
    }
    let outcome = f(&cfg)?;
    let written = outcome.artifacts.write_to(&cfg.output_dir)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    println!("{}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.summary);
    Ok(outcome.passed)
}

fn rayon_pool(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("--jobs must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
