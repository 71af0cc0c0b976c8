//! Command-line driver for pulsed-measurement experiments on a driven
//! three-level atom: the survival-probability table, light/dark period
//! statistics, trajectory step series, slow-mode eigendata, integrator
//! diagnostics, and a built-in verification suite.
//!
//! Results are written as CSV (canonical) or JSON; given the same
//! configuration and seed the emitted bytes are identical regardless of
//! `--threads`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Experiment, ExperimentConfig, OutputFormat};
use error::{CliError, EXIT_INVALID_INPUT};

#[derive(Parser, Debug)]
#[command(
    name = "zeno",
    version,
    about = "Pulsed-measurement experiments on a driven three-level atom"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (sectioned key = value document)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master random seed, overriding the configured one
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Output file, overriding the configured path (env: ZENO_OUT)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format, overriding the configured one
    #[arg(long, global = true, value_enum, value_name = "FMT")]
    format: Option<FormatArg>,
    /// Worker threads, 0 = one per core (env: ZENO_THREADS)
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Survival-probability table for n ∈ {1, 2, 4, 8, 16, 32, 64} pulses
    Itano,
    /// Light/dark period census with analytic comparison rows
    Periods,
    /// Per-trajectory fluorescence telegraphs and ideal-measurement paths
    Paths,
    /// Slow-mode eigenstructure, first-order formulas vs. numerics
    Eigen,
    /// Master-equation populations under step refinement
    Bloch,
    /// Run the built-in verification suite
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

impl Command {
    fn experiment(&self) -> Option<Experiment> {
        match self {
            Command::Itano => Some(Experiment::ItanoTable),
            Command::Periods => Some(Experiment::SingleAtomPeriods),
            Command::Paths => Some(Experiment::TrajectoryPaths),
            Command::Eigen => Some(Experiment::EigenCheck),
            Command::Bloch => Some(Experiment::BlochCheck),
            Command::Selftest => None,
        }
    }
}

/// Entry point behind `main`: parses arguments, runs the subcommand, and
/// returns the process exit code (0 success, 1 invalid input or failed
/// verification, 2 internal error).
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here as "errors" with exit code 0.
            let code = if err.use_stderr() { EXIT_INVALID_INPUT } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = resolve_threads(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;

    if matches!(cli.command, Command::Selftest) {
        let exe = std::env::current_exe().ok();
        let outcomes = pool.install(|| selftest::run_all(exe.as_deref()));
        let mut all_passed = true;
        for outcome in &outcomes {
            println!("{}", outcome.line());
            all_passed &= outcome.passed;
        }
        return if all_passed {
            Ok(())
        } else {
            Err(CliError::validation_msg("one or more verification checks failed"))
        };
    }

    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            CliError::validation_msg(format!("cannot read config {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    let mut cfg: ExperimentConfig = config::parse_config(&text)?;
    if let Some(experiment) = cli.command.experiment() {
        cfg.experiment = experiment;
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.output_format = format.into();
    }
    let out_path = cli
        .out
        .or_else(|| std::env::var_os("ZENO_OUT").map(PathBuf::from))
        .unwrap_or_else(|| cfg.resolved_output_path());

    let table = pool.install(|| experiments::run_experiment(&cfg))?;
    table.write(&out_path, cfg.output_format)?;
    println!("wrote {} ({} rows, config {})", out_path.display(), table.rows.len(), table.config_hash);
    Ok(())
}

/// Thread count resolution: explicit flag wins, then `ZENO_THREADS`, then
/// the library default (one worker per core).
fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("ZENO_THREADS") {
        Ok(value) => value.trim().parse::<usize>().map(Some).map_err(|_| {
            CliError::validation_msg(format!("ZENO_THREADS must be a non-negative integer, got `{value}`"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::validation_msg(format!("ZENO_THREADS: {e}"))),
    }
}
