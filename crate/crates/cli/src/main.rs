//! `fsl`: command-line front end for the frame-sparse recovery workbench.
//!
//! Every invocation prints exactly one JSON document on stdout; logs go to
//! stderr. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, `CertifiedHolds`, decoder `Optimal` |
//! | 1 | numerical failure inside the library |
//! | 2 | bad arguments, spec or config |
//! | 3 | file could not be read or written |
//! | 10 / 11 / 12 | `CertifiedFails` / `Estimate` / `NotChecked` |
//! | 20 / 21 | decoder `MaxIter` / `Infeasible` |
//! | 30 | an experiment assertion failed |

mod commands;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "fsl", version, about = "Sparse recovery with frames: generate, check, decode, experiment")]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random matrix or a frame to disk.
    Gen {
        #[arg(value_enum)]
        what: GenKind,
        /// JSON spec, inline or as a file path.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the file extension (`.fsm` is binary).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a property of a matrix or frame.
    Check(commands::CheckArgs),
    /// Run an l1 decoder.
    Decode(commands::DecodeArgs),
    /// Phase-transition grid.
    Phase(experiments::ExperimentArgs),
    /// Observed errors against the certified robust recovery bound.
    Sweep(experiments::ExperimentArgs),
    /// Counterexample pipelines.
    Counterexample {
        #[arg(value_enum)]
        which: CounterexampleKind,
        #[command(flatten)]
        args: experiments::ExperimentArgs,
    },
    /// Empirical checks of probabilistic inequalities.
    Verify {
        #[arg(value_enum)]
        which: VerifyKind,
        #[command(flatten)]
        args: experiments::ExperimentArgs,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GenKind {
    Matrix,
    Frame,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Bin,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CounterexampleKind {
    /// Diagonal scaling that destroys the null space property.
    NspScaling,
    /// F-RIP preserved under scaling while synthesis decoding fails.
    FRip,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VerifyKind {
    Smallball,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, kind: "usage", message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, kind: "io", message: message.into() }
    }
}

impl From<fsl_core::Error> for CliError {
    fn from(e: fsl_core::Error) -> Self {
        use fsl_core::Error as E;
        let (code, kind) = match &e {
            E::Io(_) | E::Format { .. } => (EXIT_IO, "io"),
            E::Lp(_) | E::NotConverged { .. } | E::Construction(_) => (EXIT_INTERNAL, "numerical"),
            _ => (EXIT_USAGE, "invalid_input"),
        };
        CliError { code, kind, message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::usage(format!("JSON: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Prints the single stdout document.
pub fn emit(value: &impl Serialize) -> CliResult<()> {
    let doc = fsl_core::io::to_json_envelope(value)?;
    match write_stdout(&doc) {
        // a closed reader is not our failure
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn write_stdout(doc: &str) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    out.write_all(doc.as_bytes())?;
    out.flush()
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: &'a str,
    exit_code: u8,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {}", e.message);
    let doc = ErrorDoc { error: ErrorBody { kind: e.kind, message: &e.message, exit_code: e.code } };
    if let Ok(s) = fsl_core::io::to_json_envelope(&doc) {
        let _ = write_stdout(&s);
    }
    ExitCode::from(e.code)
}

fn run(cli: Cli) -> CliResult<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError {
            code: EXIT_INTERNAL,
            kind: "threads",
            message: e.to_string(),
        })?;
    }
    match cli.command {
        Command::Gen { what, spec, out, format, seed } => match what {
            GenKind::Matrix => commands::gen_matrix(&spec, &out, format, seed),
            GenKind::Frame => commands::gen_frame(&spec, &out, format, seed),
        },
        Command::Check(args) => commands::check(&args),
        Command::Decode(args) => commands::decode(&args),
        Command::Phase(args) => experiments::phase(&args),
        Command::Sweep(args) => experiments::sweep(&args),
        Command::Counterexample { which: CounterexampleKind::NspScaling, args } => experiments::nsp_scaling(&args),
        Command::Counterexample { which: CounterexampleKind::FRip, args } => experiments::f_rip(&args),
        Command::Verify { which: VerifyKind::Smallball, args } => experiments::smallball(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            return fail(&CliError::usage(msg.trim().trim_start_matches("error: ")));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(&e),
    }
}
