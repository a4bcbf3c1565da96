use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcs_verify::cli::{
    load, render, run, CliError, Format, GammaPerturbation, RunOptions, SamplingBlock, SuiteGroup, PAPER_EXAMPLE_JSON,
};

/// Certifies Lorentzian concircular structures, their quarter-symmetric
/// metric connections and invariant submanifolds against their identities.
///
/// Exit status: 0 when every check passes, 1 when one fails, 2 on input
/// errors.
#[derive(Debug, Parser)]
#[command(name = "lcs-verify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Number of sample points (half lattice, half seeded random).
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Seed for the random half of the sample.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Absolute tolerance.
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Relative tolerance, against the larger side of each comparison.
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Add EXPR to the Levi-Civita coefficient Γ^K_{IJ} before the
    /// metric-compatibility checks, written K,I,J:EXPR.
    #[arg(long, global = true, value_name = "K,I,J:EXPR")]
    perturb_gamma: Option<GammaPerturbation>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structure identities of (g, ξ).
    Validate { file: PathBuf },
    /// Structure identities, connection compatibility and the
    /// quarter-symmetric curvature identities.
    Identities { file: PathBuf },
    /// Invariance, invariant-submanifold identities, parallelism and
    /// recurrence suites for the document's immersion.
    Submanifold { file: PathBuf },
    /// Every suite.
    Check { file: PathBuf },
    /// Every suite on the built-in five-dimensional example.
    PaperExample {
        /// Print the example document instead of running it.
        #[arg(long)]
        print_document: bool,
    },
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let (text, groups) = match &cli.command {
        Command::PaperExample { print_document: true } => {
            print!("{PAPER_EXAMPLE_JSON}");
            return Ok(ExitCode::SUCCESS);
        }
        Command::PaperExample { .. } => (PAPER_EXAMPLE_JSON.to_string(), SuiteGroup::ALL.to_vec()),
        Command::Validate { file } => (read(file)?, vec![SuiteGroup::Structure]),
        Command::Identities { file } => (read(file)?, vec![SuiteGroup::Structure, SuiteGroup::Identities]),
        Command::Submanifold { file } => (read(file)?, vec![SuiteGroup::Submanifold]),
        Command::Check { file } => (read(file)?, SuiteGroup::ALL.to_vec()),
    };
    let c = cli.common;
    let def = load(&text)?;
    let opts = RunOptions {
        groups,
        sampling: SamplingBlock { points: c.points, seed: c.seed, atol: c.atol, rtol: c.rtol },
        perturb_gamma: c.perturb_gamma,
    };
    let report = run(&def, &opts)?;
    let format = match c.format {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
    };
    print!("{}", render(&report, format));
    Ok(ExitCode::from(report.exit_code()))
}

fn read(file: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(file).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::EXIT_CODE)
        }
    }
}
