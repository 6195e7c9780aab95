//! `squeeze run <config>` / `squeeze validate <config>`.
//!
//! Exit codes: 0 success, 1 invalid config, 2 runtime failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spin_squeeze::harness::{parse_config, run_experiment, ExperimentConfig, RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "squeeze",
    version,
    about = "Projection-noise squeezing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV.
    Run {
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

const VALIDATION_FAILURE: u8 = 1;
const RUNTIME_FAILURE: u8 = 2;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(VALIDATION_FAILURE)
    })?;
    parse_config(&text).map_err(|errors| {
        for e in &errors.0 {
            eprintln!("{}: {e}", path.display());
        }
        ExitCode::from(VALIDATION_FAILURE)
    })
}

fn run(config: &Path, out: Option<&Path>, seed: Option<u64>, threads: Option<usize>) -> ExitCode {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    let options = RunOptions {
        threads,
        ..Default::default()
    };
    let sink: Box<dyn Write> = match out {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(f),
            Err(e) => {
                eprintln!("error: cannot create {}: {e}", path.display());
                return ExitCode::from(RUNTIME_FAILURE);
            }
        },
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    let result = run_experiment(&cfg, &mut sink, &options);
    let flushed = sink.flush();
    match (result, flushed) {
        (Ok(summary), Ok(())) => {
            if let Some(path) = out {
                eprintln!("wrote {} rows to {}", summary.rows, path.display());
            }
            ExitCode::SUCCESS
        }
        (Err(RunError::Config(e)), _) => {
            eprintln!("{e}");
            ExitCode::from(VALIDATION_FAILURE)
        }
        (Err(e), _) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME_FAILURE)
        }
        (Ok(_), Err(e)) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(RUNTIME_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => run(&config, out.as_deref(), seed, threads),
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}: valid {} config", config.display(), cfg.experiment);
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
