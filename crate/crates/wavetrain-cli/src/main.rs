//! Command-line front end over the wavetrain library: band tables,
//! eikonal fields, packet reconstructions, fine-grid reference runs,
//! validation suites, and plot-data export. Every run emits one
//! deterministic artifact directory with a manifest; identical
//! configurations produce byte-identical numeric CSVs.

mod artifact;
mod config;
mod runs;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::ExperimentConfig;

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exits 1.
    Usage(String),
    /// A solver or simulation failed; exits 2.
    Numerical(String),
    /// A validation suite ran and found failing checks; exits 3.
    Validation(String),
}

impl From<wavetrain::Error> for CliError {
    fn from(e: wavetrain::Error) -> Self {
        match e {
            wavetrain::Error::InvalidInput(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("io: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "wavetrain", version, about = "Wave propagation in periodic media: bands, rays, packets, reference runs")]
struct Cli {
    /// JSON experiment configuration; values set here override flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band intervals and dispersion samples of the infinite-contrast cell.
    Bands {
        /// Medium as key=value pairs, e.g. h=0.5,a2=1.
        #[arg(long)]
        medium: Option<String>,
        /// Half-open band index range, e.g. 0..6.
        #[arg(long)]
        n: Option<String>,
        /// Artifact root directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase and transported amplitude along characteristics.
    Eikonal {
        /// Artifact root directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wave-packet reconstruction by quadrature and stationary phase.
    Packet {
        /// quadrature, stationary_phase, or both.
        #[arg(long)]
        method: Option<String>,
        /// Artifact root directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fine-grid simulation of the fast-oscillation field.
    Reference {
        /// Artifact root directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Named validation suites with pass/fail verdicts.
    Validate {
        /// lemmas, spectrum, transport, or all.
        #[arg(long)]
        suite: Option<String>,
        /// Seed for suite-internal randomized draws.
        #[arg(long)]
        seed: Option<u64>,
        /// Artifact root directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot-ready long-format CSVs from an existing artifact directory.
    Plotdata {
        /// Artifact directory produced by a previous run.
        artifact: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file_cfg = match &cli.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None => None,
    };
    match cli.command {
        Command::Bands { medium, n, out } => runs::bands(medium, n, out, file_cfg),
        Command::Eikonal { out } => runs::eikonal(out, file_cfg),
        Command::Packet { method, out } => runs::packet(method, out, file_cfg),
        Command::Reference { out } => runs::reference(out, file_cfg),
        Command::Validate { suite, seed, out } => runs::validate(suite, seed, out, file_cfg),
        Command::Plotdata { artifact } => runs::plotdata(&artifact),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("validation failure: {msg}");
            ExitCode::from(3)
        }
    }
}
