use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use d2d_powergame::baselines::RuleRegistry;
use d2d_powergame::cli::{execute, parse_config, write_outputs, CliError, Command, Config};

#[derive(Parser)]
#[command(
    name = "d2d-powergame",
    version,
    about = "Game-theoretic power control for D2D/cellular uplinks"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// Configuration file (`section.key = value` lines). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Iterate one rule to convergence and write the per-iteration trace.
    Run,
    /// Sweep alpha, price or device count over seeded scenarios.
    Sweep,
    /// Compare rules on common seeded scenarios.
    Compare,
    /// Check the standard-function conditions and Jacobian of a rule.
    Check,
}

fn load(args: &Args) -> Result<Config, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Run => Command::Run,
        Cmd::Sweep => Command::Sweep,
        Cmd::Compare => Command::Compare,
        Cmd::Check => Command::Check,
    };
    let result = load(&args).and_then(|cfg| {
        let out = execute(command, &cfg, &RuleRegistry::with_defaults())?;
        let printed = write_outputs(&out, &cfg.output.dir, cfg.output.format)?;
        Ok((out.exit_code(), printed))
    });
    match result {
        Ok((code, printed)) => {
            print!("{printed}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
