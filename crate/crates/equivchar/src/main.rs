use clap::{Parser, Subcommand, ValueEnum};
use equivchar::cli::{self, CliError, Format, Operation, Overrides};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Thread count for the data-parallel core.
#[cfg(feature = "parallel")]
const THREADS_VAR: &str = "EQUIVCHAR_THREADS";

#[derive(Parser)]
#[command(name = "equivchar", version, about = "Equivariant Chern–Simons characters on tori")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Scenario config; the built-in scenario of the subcommand when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Uniform tolerance for every check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Evaluate on the thread pool.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Chern–Simons action on T³.
    Cs,
    /// Integrated character Ξ(φ, γ).
    Xi,
    /// Axiom battery.
    Verify,
    /// Curvature two-form and ε-loop convergence.
    Curvature,
    /// Moment map against the orbit derivative.
    Moment,
    /// Exact lattice oracle.
    Oracle,
    /// Every operation listed in the scenario.
    Report,
}

impl Command {
    fn operation(self) -> Option<Operation> {
        match self {
            Command::Cs => Some(Operation::Cs),
            Command::Xi => Some(Operation::Xi),
            Command::Verify => Some(Operation::Verify),
            Command::Curvature => Some(Operation::Curvature),
            Command::Moment => Some(Operation::Moment),
            Command::Oracle => Some(Operation::Oracle),
            Command::Report => None,
        }
    }
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var(THREADS_VAR).ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(args: &Args) -> Result<cli::Report, CliError> {
    let op = args.command.operation();
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse { line: None, field: None, message: format!("{}: {e}", path.display()) })?,
        None => cli::builtin_scenario(op).to_string(),
    };
    let ops: Vec<Operation> = op.into_iter().collect();
    cli::run_config(&text, &ops, Overrides { grid: args.grid, tol: args.tol })
}

fn main() -> ExitCode {
    let args = Args::parse();
    configure_threads();
    equivchar::set_parallel(args.parallel);
    let format = match args.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    match run(&args) {
        Ok(report) => {
            let bytes = cli::emit_report(&report, format);
            let _ = std::io::stdout().write_all(&bytes);
            if !report.pass {
                for r in &report.results {
                    for c in r.checks.iter().filter(|c| !c.pass) {
                        eprintln!("FAIL {} {}: residual {:.3e} tolerance {:.3e}", r.operation, c.name, c.residual, c.tolerance);
                    }
                }
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
