//! Command-line surface: argument definitions, dispatch, and exit codes.
//!
//! Exit codes: 0 on success, 1 for command-line or input-file misuse, 2 for
//! numerical failures at run time, 3 when a verification suite fails.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{self, Failure};

/// Soliton and flow laboratory for radially symmetric G2 backgrounds.
#[derive(Debug, Parser)]
#[command(name = "g2flow", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one soliton profile and write trajectory plus summary.
    Solve(SolveArgs),
    /// Run a parameter grid concurrently and write one CSV row per point.
    Sweep(SweepArgs),
    /// Simulate the parabolic flow from a JSON configuration.
    Flow(FlowArgs),
    /// Run the built-in verification suites against the numerical kernels.
    Verify(VerifyArgs),
}

/// Background selector shared by `solve` and `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseKind {
    /// Flat 7-space.
    Flat,
    /// Nearly-Kaehler cone.
    Nk,
    /// Calabi-Yau cylinder.
    Cy,
    /// First Bryant-Salamon family.
    BsA,
    /// Second Bryant-Salamon family.
    BsB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Background case.
    #[arg(long, value_enum)]
    pub case: CaseKind,

    /// Soliton constant c (cases flat and nk).
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,

    /// Exponent b of the cylinder soliton (case cy).
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,

    /// Scale parameter lambda (cases bs-a and bs-b).
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,

    /// Initial slope u'(0).
    #[arg(long, allow_negative_numbers = true)]
    pub a1: f64,

    /// Outer radius; defaults to 200 (flat, nk), 20000 (bs-a, bs-b), 10 (cy).
    #[arg(long)]
    pub rmax: Option<f64>,

    /// Local-error tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    /// Directory for the output files, created if absent.
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,

    /// Trajectory table format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    /// Also write a plot.svg with the angle and torsion curves.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Background case; the cylinder has a closed form and is not swept.
    #[arg(long, value_enum)]
    pub case: CaseKind,

    /// Comma-separated grid of c values (cases flat and nk).
    #[arg(long = "c-values", value_delimiter = ',', allow_hyphen_values = true)]
    pub c_values: Option<Vec<f64>>,

    /// Comma-separated grid of lambda values (cases bs-a and bs-b).
    #[arg(
        long = "lambda-values",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    pub lambda_values: Option<Vec<f64>>,

    /// Comma-separated grid of initial slopes u'(0).
    #[arg(long = "a1-values", value_delimiter = ',', allow_hyphen_values = true)]
    pub a1_values: Option<Vec<f64>>,

    /// Outer radius; same per-case defaults as `solve`.
    #[arg(long)]
    pub rmax: Option<f64>,

    /// Local-error tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Directory for sweep.csv, created if absent.
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// JSON configuration file describing topology, initial data, and times.
    #[arg(long)]
    pub config: PathBuf,

    /// Directory for report.json and the snapshot CSVs, created if absent.
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteKind {
    /// Closed-form Laplacian and gradient identities on every background.
    Geometry,
    /// Finite-difference oracle convergence on flat 7-space.
    FdOracle,
    /// Recurrence and residual checks of the origin series.
    Series,
    /// Containment of trajectories in linear comparison envelopes.
    Envelope,
    /// Constancy of the first integral Q along steady solitons.
    QConstancy,
    /// Lyapunov derivative against path differencing.
    LyapunovFd,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suites to run; defaults to all of them.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub suite: Option<Vec<SuiteKind>>,
}

/// Parse arguments, run the selected command, and return the process exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => commands::solve::run(&args),
        Command::Sweep(args) => commands::sweep::run(&args),
        Command::Flow(args) => commands::flow::run(&args),
        Command::Verify(args) => commands::verify::run(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
