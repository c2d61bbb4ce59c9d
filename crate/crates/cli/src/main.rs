use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jumptail_cli::{destination, run_with_threads, threads_from_env, write_output, CliError, Command, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "jumptail", version, about = "Short-time tail asymptotics for jump-diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides the configured path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace eps_list with a single cutoff.
    #[arg(long)]
    eps: Option<f64>,
    /// Record per-row failures instead of aborting.
    #[arg(long)]
    keep_going: bool,
    /// Also check the exponential moment condition.
    #[arg(long)]
    check_s5: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the model assumptions on the default grids.
    Validate(Common),
    /// Expansion against Monte Carlo for tail probabilities.
    Compare(Common),
    /// Out-of-the-money call prices.
    Price(Common),
    /// Kernel identity and reparametrisation bounds.
    Equivalence(Common),
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (cmd, c) = match cli.command {
        Sub::Validate(c) => (Command::Validate, c),
        Sub::Compare(c) => (Command::Compare, c),
        Sub::Price(c) => (Command::Price, c),
        Sub::Equivalence(c) => (Command::Equivalence, c),
    };
    let mut cfg = ExperimentConfig::load(&c.config)?;
    cfg.apply(&Overrides {
        out: c.out.clone(),
        seed: c.seed,
        eps: c.eps,
        keep_going: c.keep_going,
        check_s5: c.check_s5,
    });
    let outcome = run_with_threads(cmd, &cfg, threads_from_env()?)?;
    for w in &outcome.warnings {
        eprintln!("jumptail: {w}");
    }
    let dest = destination(&cfg, outcome.format, c.out.as_deref());
    write_output(&outcome.body, dest.as_deref())?;
    if !outcome.passed {
        eprintln!("jumptail: checks failed");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("jumptail: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
