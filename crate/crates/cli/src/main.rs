//! `levyheat`: batch front end for the solvers, estimators and bounds.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::{Config, Origin};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "levyheat", version, about = "Stochastic heat equations with Poisson noise: solve, estimate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` scenario file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set lambda=0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for CSVs.
    #[arg(long, global = true, env = "LEVYHEAT_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for replica fan-out. Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Master seed, overriding the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solve compensated scenarios with Υ(β) = ∞ anyway; results are labeled ungated.
    #[arg(long, global = true)]
    override_existence_gate: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Kernel identity residuals.
    KernelCheck,
    /// One Poisson cloud.
    SamplePrm,
    /// One replica of the mild solution.
    Solve,
    /// E|u(t, x)|^p on a time grid.
    Moments,
    /// Coupled increments at dyadic lags against the analytic bound.
    Increments,
    /// Kolmogorov–Čentsov regression on the increments.
    Holder,
    /// Analytic increment bound at (mc.t1, mc.t2).
    Bounds,
    /// Continuity verdict; exit 3 on FAIL.
    Verify,
    /// Finite-horizon Lyapunov-exponent proxy.
    Lyapunov,
}

fn load(cli: &Cli) -> Result<Config, CliError> {
    let mut config = Config::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        config.parse_file(&path.display().to_string(), &text)?;
    }
    for arg in &cli.set {
        config.apply_override(arg)?;
    }
    if let Some(seed) = cli.seed {
        config.set("seed", &seed.to_string(), Origin::Set)?;
    }
    if cli.override_existence_gate {
        config.set("override_existence_gate", "true", Origin::Set)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<String, CliError> {
    let config = load(&cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("levyheat-out"));
    let ctx = Context { config, out };
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Validation("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::KernelCheck => commands::kernel_check(&ctx),
        Command::SamplePrm => commands::sample_prm(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Moments => commands::moments(&ctx),
        Command::Increments => commands::increments(&ctx),
        Command::Holder => commands::holder(&ctx),
        Command::Bounds => commands::bounds(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Lyapunov => commands::lyapunov(&ctx),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Verdict(summary) => println!("{summary}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
