//! Command-line harness for `nsgap`: every library operation as a
//! subcommand, constant calibration, and the verification suites.
//!
//! Each invocation produces one [`report::Report`] embedding the tool
//! version, the full configuration, its SHA-256 hash, the seed and the
//! result. Identical `(config, seed)` pairs give byte-identical reports.
//!
//! Exit codes: 0 success, 1 a suite or check reported a failure,
//! 2 invalid input or configuration, 3 numerical failure (no convergence),
//! 64 unknown subcommand.

pub mod calibrate;
pub mod commands;
pub mod input;
pub mod report;
pub mod sampling;
pub mod suite;

use clap::{Parser, Subcommand};
use report::{Format, Report};
use serde_json::Value;
use std::io::Write;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNKNOWN_SUBCOMMAND: i32 = 64;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "NSGAP_THREADS";

/// Failures surfaced by the CLI.
#[derive(Debug)]
pub enum CliError {
    Core(nsgap::Error),
    Io(String),
    Config(String),
    EmptyFamily,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::EmptyFamily => write!(f, "the instance family is empty"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<nsgap::Error> for CliError {
    fn from(e: nsgap::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nsgap", version, about = "Nonlinear spectral gaps, average-distortion embeddings and expander bounds")]
pub struct Cli {
    /// Seed for every random choice (reports are reproducible per seed).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<std::path::PathBuf>,
    /// Report encoding.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nonlinear spectral gap γ(A, d^p).
    Gap(commands::GapArgs),
    /// Nonlinear absolute spectral gap γ₊(A, d^q).
    GapPlus(commands::GapPlusArgs),
    /// Rayleigh-quotient calculus, Markov type, sandwich and pointwise checks.
    RayleighCheck(commands::RayleighCheckArgs),
    /// Mazur map round trip, norm transfer and Hölder exponent.
    MazurCheck(commands::MazurCheckArgs),
    /// Extrapolation ratios between γ(B, ‖·‖^p) and γ(B, ‖·‖^q).
    Extrapolate(commands::ExtrapolateArgs),
    /// Hilbertian approximation constant D_X via the John ellipsoid.
    John(commands::JohnArgs),
    /// Quadratic-average-distortion Hilbert embedding of a finite metric.
    Embed(commands::EmbedArgs),
    /// Forward duality check and assembled-witness check on an embedding.
    VerifyDuality(commands::VerifyDualityArgs),
    /// Random regular graph generation, spectrum and distance spread.
    Expander(commands::ExpanderArgs),
    /// Closed-form bound calculators.
    Bounds(commands::BoundsArgs),
    /// Fit an unspecified universal constant over an instance family.
    Calibrate(calibrate::CalibrateArgs),
    /// Run a verification battery.
    Suite(suite::SuiteArgs),
}

/// What a subcommand produced.
pub struct Outcome {
    pub config: Value,
    pub result: Value,
    /// Replaces the generic CSV rendering when present.
    pub csv: Option<String>,
    /// False when a check or suite reported a failure.
    pub passed: bool,
}

impl Outcome {
    pub fn ok(config: Value, result: Value) -> Self {
        Outcome { config, result, csv: None, passed: true }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gap(_) => "gap",
        Command::GapPlus(_) => "gap-plus",
        Command::RayleighCheck(_) => "rayleigh-check",
        Command::MazurCheck(_) => "mazur-check",
        Command::Extrapolate(_) => "extrapolate",
        Command::John(_) => "john",
        Command::Embed(_) => "embed",
        Command::VerifyDuality(_) => "verify-duality",
        Command::Expander(_) => "expander",
        Command::Bounds(_) => "bounds",
        Command::Calibrate(_) => "calibrate",
        Command::Suite(_) => "suite",
    }
}

fn dispatch(cmd: &Command, seed: u64) -> Result<Outcome, CliError> {
    match cmd {
        Command::Gap(a) => commands::gap(a, seed),
        Command::GapPlus(a) => commands::gap_plus(a),
        Command::RayleighCheck(a) => commands::rayleigh_check(a, seed),
        Command::MazurCheck(a) => commands::mazur_check(a, seed),
        Command::Extrapolate(a) => commands::extrapolate(a, seed),
        Command::John(a) => commands::john(a),
        Command::Embed(a) => commands::embed(a),
        Command::VerifyDuality(a) => commands::verify_duality(a),
        Command::Expander(a) => commands::expander(a, seed),
        Command::Bounds(a) => commands::bounds(a, seed),
        Command::Calibrate(a) => calibrate::calibrate(a, seed),
        Command::Suite(a) => suite::run_suite(a, seed),
    }
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Run with process arguments, writing to the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Run with explicit output streams; returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::InvalidSubcommand => EXIT_UNKNOWN_SUBCOMMAND,
                _ => EXIT_VALIDATION,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let outcome = thread_count().and_then(|threads| match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?
            .install(|| dispatch(&cli.command, cli.seed)),
        None => dispatch(&cli.command, cli.seed),
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let report = Report::new(command_name(&cli.command), outcome.config, cli.seed, outcome.result);
    let text = match cli.format {
        Format::Json => report::to_json(&report),
        Format::Csv => outcome.csv.unwrap_or_else(|| report::to_csv(&report)),
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write report: {e}");
        return EXIT_VALIDATION;
    }
    if outcome.passed {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
