//! Command-line front end: configuration, the four commands and output.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

use std::path::{Path, PathBuf};

pub use commands::{run, Command, Format, Outcome};
pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;

/// Thread count from `JUMPTAIL_THREADS`; `None` leaves rayon's default.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("JUMPTAIL_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("JUMPTAIL_THREADS: expected a positive integer, got {s:?}"))),
        },
    }
}

/// Runs a command on a pool of `threads` workers (rayon's default if `None`).
pub fn run_with_threads(cmd: Command, cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(cmd, cfg))
}

/// Where the document goes: `--out`, then the configured path, then stdout.
pub fn destination(cfg: &ExperimentConfig, format: Format, out: Option<&Path>) -> Option<PathBuf> {
    out.map(Path::to_path_buf).or_else(|| match format {
        Format::Csv => cfg.outputs.csv.clone(),
        Format::Json => cfg.outputs.report.clone(),
    })
}

pub fn write_output(body: &str, dest: Option<&Path>) -> Result<(), CliError> {
    match dest {
        Some(p) => std::fs::write(p, body).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}
