use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrex_cli::{parse_config_for, run, ConfigError, Mode, RunError};

#[derive(Parser)]
#[command(name = "lrex", version, about = "Long-range exclusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Flags {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads, 0 for all cores (overrides the config)
    #[arg(long)]
    threads: Option<usize>,
    /// base seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Kinetic Monte Carlo estimate of the occupation-time variance
    Simulate(Flags),
    /// Exact variance and resolvent on a small ring
    Exact(Flags),
    /// Spectral integrals on the infinite lattice
    Quadrature(Flags),
    /// Scaling-exponent fit
    Fit(Flags),
    /// Second-class particle covariance identity
    Secondclass(Flags),
    /// Run the acceptance criteria
    VerifyAll(Flags),
    /// Run whatever mode the config (or a manifest) names
    Run(Flags),
}

fn load(mode: Option<Mode>, flags: &Flags) -> Result<lrex_cli::ExperimentConfig, RunError> {
    let text = match &flags.config {
        Some(p) => std::fs::read_to_string(p).map_err(|source| RunError::Io { path: p.clone(), source })?,
        None if mode == Some(Mode::VerifyAll) => String::new(),
        None => {
            return Err(ConfigError::Validation { field: "--config".into(), msg: "a config file is required".into() }.into())
        }
    };
    let mut overrides = Vec::new();
    if let Some(s) = flags.seed {
        overrides.push(("seed", s.to_string()));
    }
    if let Some(o) = &flags.out {
        overrides.push(("out", o.display().to_string()));
    }
    if let Some(t) = flags.threads {
        overrides.push(("threads", t.to_string()));
    }
    Ok(parse_config_for(&text, mode, &overrides)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, flags) = match &cli.command {
        Command::Simulate(f) => (Some(Mode::Simulate), f),
        Command::Exact(f) => (Some(Mode::Exact), f),
        Command::Quadrature(f) => (Some(Mode::Quadrature), f),
        Command::Fit(f) => (Some(Mode::Fit), f),
        Command::Secondclass(f) => (Some(Mode::SecondClass), f),
        Command::VerifyAll(f) => (Some(Mode::VerifyAll), f),
        Command::Run(f) => (None, f),
    };
    let result = load(mode, flags).and_then(|cfg| run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
