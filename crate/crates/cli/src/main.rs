use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod output;
mod run;

use config::{Format, JobConfig, Task};
use run::{RunError, EXIT_INVARIANT, EXIT_OK};

#[derive(Parser)]
#[command(name = "pjacobi", version, about = "States and scattering for perturbed periodic Jacobi operators")]
struct Cli {
    #[command(subcommand)]
    task: Command,
    /// TOML job description.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Band edges, gaps, Dirichlet and Neumann points.
    Bands,
    /// All zeros of F, classified by sheet and kind.
    States,
    /// Transmission and reflection coefficients on the bands.
    Scattering,
    /// Weak-coupling motion of the states at a gap.
    Smallt,
    /// Leading coefficients of F and ξ.
    Asymptotics,
    /// The invariant battery on one instance.
    Verify,
}

impl From<Command> for Task {
    fn from(c: Command) -> Task {
        match c {
            Command::Bands => Task::Bands,
            Command::States => Task::States,
            Command::Scattering => Task::Scattering,
            Command::Smallt => Task::Smallt,
            Command::Asymptotics => Task::Asymptotics,
            Command::Verify => Task::Verify,
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    let path = cli.config.as_ref().ok_or(config::ConfigError::Field {
        field: "config",
        message: "--config <path> is required".into(),
    })?;
    let mut cfg = JobConfig::load(path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    let doc = run::run(cli.task.into(), &cfg)?;
    let format = cli.format.or(cfg.format).unwrap_or_default();
    let out = cli.out.clone().or(cfg.out.clone());
    let mut sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    match format {
        Format::Json => doc.write_json(&mut sink)?,
        Format::Csv => doc.table.write_csv(&mut sink)?,
    }
    sink.flush()?;
    Ok(if doc.ok { EXIT_OK } else { EXIT_INVARIANT })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => {
            if code != EXIT_OK {
                eprintln!("pjacobi: an asserted invariant failed");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("pjacobi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
