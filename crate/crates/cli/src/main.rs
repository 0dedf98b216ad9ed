//! `coxbvm`: simulate survival data, fit the Cox model, sample its posterior
//! under beta or gamma process priors and compare the posterior with its
//! large-sample normal limit.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coxbvm::bvm::ReportFormat;
use coxbvm::priors::PriorFamily;

use crate::error::CliError;

/// Exit status for command-line usage errors.
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "coxbvm", version, about = "Bayesian Cox regression with beta and gamma process priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate records from a proportional-hazards model and write them as CSV.
    Simulate(SimulateArgs),
    /// Maximize the partial likelihood and write the fit as JSON.
    Fit(FitArgs),
    /// Sample the posterior of the regression coefficients and, optionally, hazard paths.
    Posterior(PosteriorArgs),
    /// Compare the posterior with its normal limit and write a report.
    BvmCheck(BvmCheckArgs),
    /// Estimate the frequentist coverage of credible intervals by replication.
    Coverage(CoverageArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArg {
    /// Input CSV with columns time,status,z1,...,zp.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// True regression coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "B1,B2,...")]
    beta0: Option<Vec<f64>>,
    /// Upper end of the uniform censoring law.
    #[arg(long, value_name = "X")]
    censoring_upper: Option<f64>,
    /// Administrative censoring horizon.
    #[arg(long, value_name = "T")]
    tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Beta,
    Gamma,
}

#[derive(Debug, Args)]
struct PriorArgs {
    /// Prior family of the baseline cumulative hazard.
    #[arg(long, value_enum)]
    prior: Option<FamilyArg>,
    /// Constant concentration c of the prior.
    #[arg(long, value_name = "C")]
    c: Option<f64>,
    /// Constant prior hazard rate lambda.
    #[arg(long, value_name = "RATE")]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct ChainArgs {
    /// Retained chain draws.
    #[arg(long)]
    draws: Option<usize>,
    /// Discarded initial chain steps.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PathArgs {
    /// Number of joint (beta, A) draws.
    #[arg(long)]
    path_draws: Option<usize>,
    /// Chain steps between joint draws.
    #[arg(long)]
    thin: Option<usize>,
    /// Truncation level for small jumps of sampled paths.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Evaluation grid for hazard paths, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "T1,T2,...")]
    grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

impl From<FamilyArg> for PriorFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Beta => PriorFamily::Beta,
            FamilyArg::Gamma => PriorFamily::Gamma,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Number of records.
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArg,
    /// Convergence threshold on the gradient sup-norm.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Maximum Newton iterations.
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Output JSON; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PosteriorArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArg,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    paths: PathArgs,
    /// Output CSV of coefficient draws; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also sample hazard paths and write them here as draw,t,A CSV.
    #[arg(long, value_name = "FILE")]
    paths_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BvmCheckArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    data: DataArg,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    paths: PathArgs,
    /// Skip the hazard comparison.
    #[arg(long)]
    no_hazard: bool,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output report; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the density estimate of sqrt(n)(beta - beta_hat) and its limit as CSV.
    #[arg(long, value_name = "FILE")]
    density_out: Option<PathBuf>,
    /// Exit 0 even when a verdict fails.
    #[arg(long)]
    no_assert: bool,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Records per replication.
    #[arg(long)]
    n: Option<usize>,
    /// Number of replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Credible level.
    #[arg(long)]
    level: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    chain: ChainArgs,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output report; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Posterior(args) => commands::posterior(args),
        Command::BvmCheck(args) => commands::bvm_check(args),
        Command::Coverage(args) => commands::coverage(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
