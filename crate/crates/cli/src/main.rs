use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod manifest;

#[derive(Debug, Parser)]
#[command(
    name = "sparsedag",
    version,
    about = "Sparse Gaussian DAG estimation by l0-penalized likelihood"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a model and a Gaussian sample from it.
    Simulate(SimulateArgs),
    /// Estimate a DAG from data or a covariance matrix.
    Fit(FitArgs),
    /// Population representation of a covariance under an ordering.
    Represent(RepresentArgs),
    /// Evaluate the identifiability and sparsity conditions.
    Check(CheckArgs),
    /// Evaluate the closed-form theorem constants.
    Constants(ConstantsArgs),
    /// Run a rate or equal-variance experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Ar1,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Profile,
    Equalvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ConstantsFrom {
    /// σ₀² = largest variance and Λ_min² = smallest eigenvalue of the input.
    Sigma,
    /// Use --sigma0-sq and --lambda-min-sq.
    Given,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: ModelKind,
    #[arg(long)]
    p: usize,
    /// Chain weight (ar1).
    #[arg(long, required_if_eq("kind", "ar1"), conflicts_with = "s0")]
    beta0: Option<f64>,
    /// Number of edges (random).
    #[arg(long, required_if_eq("kind", "random"))]
    s0: Option<usize>,
    /// In-degree cap for random models.
    #[arg(long)]
    max_parents: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["data", "sigma"])))]
struct FitArgs {
    /// n × p data CSV, optional header.
    #[arg(long)]
    data: Option<PathBuf>,
    /// p × p covariance CSV.
    #[arg(long, requires = "n")]
    sigma: Option<PathBuf>,
    /// Sample size behind --sigma.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda2: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Profile)]
    mode: ModeArg,
    /// Defaults to min(floor(alpha n / log p), n − 2, p − 1).
    #[arg(long)]
    max_parents: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subtract column means before forming the covariance.
    #[arg(long)]
    center: bool,
    /// Write the local score table as JSON lines (exact method only).
    #[arg(long)]
    dump_table: Option<PathBuf>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RepresentArgs {
    #[arg(long)]
    sigma: PathBuf,
    /// 1-based ordering, e.g. "3,1,2".
    #[arg(long)]
    pi: String,
    #[arg(long)]
    zero_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CheckArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    n: usize,
    /// Treat --sigma as the population covariance (certifying report).
    #[arg(long)]
    population: bool,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,5,6,7")]
    conditions: Vec<String>,
    #[arg(long, value_enum, default_value_t = ConstantsFrom::Sigma)]
    constants_from: ConstantsFrom,
    #[arg(long, required_if_eq("constants_from", "given"))]
    sigma0_sq: Option<f64>,
    #[arg(long, required_if_eq("constants_from", "given"))]
    lambda_min_sq: Option<f64>,
    /// Sparsity of the target model, needed for condition 5.
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    eta0: f64,
    #[arg(long, default_value_t = 0.0)]
    eta1: f64,
    /// Defaults to σ₀² η₀² / (Λ_min² (1 − η₁)).
    #[arg(long)]
    alpha_tilde: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    eta_omega: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_star: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ConstantsArgs {
    #[arg(long)]
    sigma0: f64,
    #[arg(long)]
    lambda_min: f64,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    s0: usize,
    #[arg(long)]
    n: usize,
    /// Defaults to log p.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; all cores if omitted. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a two-column `n median_frob_err` file.
    #[arg(long)]
    gnuplot: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Represent(a) => commands::represent(a),
        Command::Check(a) => commands::check(a),
        Command::Constants(a) => commands::constants(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
