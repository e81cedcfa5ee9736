//! `fbh`: seeded, manifest-backed runs of the boundary-noise heat equation laboratory.

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use config::RunConfig;
use error::CliError;
use output::Sink;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "fbh", version, about = "Heat equation with fractional Brownian boundary noise")]
struct Cli {
    /// Run configuration with `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for replica sweeps.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Master seed, replacing noise.seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Tabulate the Robin boundary kernel.
    Kernel,
    /// Sample the stochastic convolution and run its probes.
    Convolve,
    /// Solve the boundary equation for one noise realization.
    Solve,
    /// Malliavin derivatives and their probes.
    Malliavin,
    /// Monte Carlo density estimate of the solution.
    Density,
    /// Fit the four kernel bound constants.
    VerifyBounds,
    /// Deterministic identity checks.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Convolve => "convolve",
            Command::Solve => "solve",
            Command::Malliavin => "malliavin",
            Command::Density => "density",
            Command::VerifyBounds => "verify-bounds",
            Command::Selftest => "selftest",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let cfg = RunConfig::parse(&text, &cli.set)?;
    match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => Ok(cfg),
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let root = std::env::var("FBH_OUTPUT_DIR").unwrap_or_else(|_| cfg.output_dir.clone());
    let dir = PathBuf::from(root).join(cli.command.name());
    let mut sink = Sink::create(&dir, cfg.format)?;
    let failures = match cli.command {
        Command::Kernel => commands::kernel(&cfg, &mut sink),
        Command::Convolve => commands::convolve(&cfg, &mut sink),
        Command::Solve => commands::solve(&cfg, &mut sink),
        Command::Malliavin => commands::malliavin(&cfg, &mut sink),
        Command::Density => commands::density(&cfg, &mut sink),
        Command::VerifyBounds => commands::verify_bounds(&cfg, &mut sink),
        Command::Selftest => commands::selftest(&cfg, &mut sink),
    }?;
    let artifacts = sink.finish(cli.command.name(), &cfg)?;
    if !failures.is_empty() {
        return Err(CliError::Probe(failures.join(", ")));
    }
    Ok(serde_json::json!({
        "status": "ok",
        "command": cli.command.name(),
        "output_dir": dir.display().to_string(),
        "outputs": artifacts.iter().map(|a| &a.file).collect::<Vec<_>>(),
    }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let d = CliError::Config(e.to_string().trim().to_string()).diagnostic();
            eprintln!("{}", serde_json::to_string(&d).unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.diagnostic()).unwrap_or_default());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
