//! Command-line driver: survival curves, stabilization manifolds, fits,
//! free-pair trapping, the invariant suite and parameter sweeps.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod manifest;
mod output;

use commands::{FitKindArg, FitRequest, StabilizeMode, StabilizeRequest, TrapRequest};
use manifest::{Defaults, ModelArgs, RunManifest, SweepParameter};

#[derive(Debug)]
pub enum CliError {
    Manifest(String),
    Solver(floquet_decay::Error),
    Validation(String),
    Io(std::io::Error),
}

impl CliError {
    /// 2 invalid manifest, 3 solver failure, 4 validation failure, 1 I/O.
    pub fn exit_code(&self) -> u8 {
        use floquet_decay::Error as E;
        match self {
            CliError::Manifest(_) => 2,
            CliError::Solver(E::Domain(_) | E::FitWindow { .. }) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Manifest(m) => write!(f, "invalid manifest: {m}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<floquet_decay::Error> for CliError {
    fn from(e: floquet_decay::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

#[derive(Parser)]
#[command(name = "floquet-decay", version, about = "Survival of a delta-bound state under harmonic delta forcing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// theta(t) from one or all pipelines: theta.csv, theta.svg, manifest.toml.
    Survival(ModelArgs),
    /// Points of the stabilization manifold: manifold.csv.
    Stabilize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "amplitude")]
        mode: StabilizeMode,
        /// Several values of a (comma separated); default the manifest's a.
        #[arg(long, value_delimiter = ',')]
        a_values: Vec<f64>,
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long, default_value_t = 50)]
        omega_steps: usize,
        /// Photon order N of the non-decay ansatz.
        #[arg(long, default_value_t = 1)]
        n: u32,
    },
    /// Fit a theta.csv (or an r,gamma table) and print the report.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: FitKindArg,
        /// Fit window as t1,t2 (r1,r2 is implied by the table).
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A Gaussian packet in the driven free pair, on and off the manifold.
    FreeTrap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Off-manifold comparison amplitude as a fraction of r_s.
        #[arg(long, default_value_t = 0.8)]
        off_factor: f64,
        #[arg(long, default_value_t = 80)]
        steps_per_period: usize,
        #[arg(long, default_value_t = 0.1)]
        dx: f64,
    },
    /// The cross-pipeline invariant suite; exit code 4 on any failure.
    Validate {
        /// Scale on every tolerance (0.1 tightens tenfold).
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
        /// Skip the Crank-Nicolson comparisons.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Survival runs over one parameter, one directory per point plus sweep.csv.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        param: Option<SweepParameter>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Survival(args) => commands::survival(&RunManifest::resolve("survival", &args, Defaults::BOUND)?),
        Command::Stabilize { model, mode, a_values, omega_min, omega_max, omega_steps, n } => {
            let m = RunManifest::resolve("stabilize", &model, Defaults::BOUND)?;
            let lo = omega_min.unwrap_or(m.config.omega);
            let req = StabilizeRequest { a_values, omega_range: (lo, omega_max.unwrap_or(lo)), omega_steps, n, mode };
            commands::stabilize(&m, &req)
        }
        Command::Fit { input, kind, window, omega, out } => {
            let window = match window.as_deref() {
                None => None,
                Some([t1, t2]) => Some((*t1, *t2)),
                Some(_) => return Err(CliError::Manifest("--window takes two values, t1,t2".into())),
            };
            commands::fit(&FitRequest { input, kind, window, omega, out }).map(|_| ())
        }
        Command::FreeTrap { model, n, off_factor, steps_per_period, dx } => {
            let m = RunManifest::resolve("free-trap", &model, Defaults::FREE)?;
            commands::free_trap(&m, &TrapRequest { n, off_factor, steps_per_period, dx })
        }
        Command::Validate { tol, quick, seed, out } => commands::validate(tol, !quick, seed, out.as_deref()),
        Command::Sweep { model, param, values } => commands::sweep(&RunManifest::resolve("sweep", &model, Defaults::BOUND)?, param, &values),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
