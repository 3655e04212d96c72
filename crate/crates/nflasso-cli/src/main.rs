//! Command-line front end for the neighborhood-fused lasso estimator.
//!
//! Exit codes: 0 success, 1 verification failure, 2 parse or IO error,
//! 3 dimension or index error, 4 solver non-convergence (partial output
//! still written), 5 invalid model. clap itself exits 2 on usage errors,
//! which matches the parse lane.

mod commands;
mod formats;

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

use commands::{
    cmd_benchmark, cmd_check, cmd_fit, cmd_kkt, cmd_simulate, BenchmarkOptions, CheckOptions,
    FitOptions, KktOptions, PenaltyFlag, SimulateOptions,
};
use formats::CliError;

#[derive(Parser)]
#[command(name = "nflasso", version, about = "Graph structure estimation via fused node-wise lasso")]
struct Cli {
    /// Worker threads for node fits and benchmark replicates
    /// (default: all cores). Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the estimator to a data matrix and write the result as JSON.
    Fit(FitArgs),
    /// Draw a Gaussian sample from a chain or user-supplied model.
    Simulate(SimulateArgs),
    /// Run a replicated method comparison from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Report theory diagnostics for a model document.
    Check(CheckArgs),
    /// Re-verify the optimality certificate of a saved fit.
    Kkt(KktArgs),
}

#[derive(Args)]
struct FitArgs {
    /// CSV data matrix, rows = observations (optional header).
    #[arg(long)]
    data: PathBuf,
    /// Edge list file, or the keyword "chain".
    #[arg(long = "local-graph")]
    local_graph: String,
    /// Significance level for the data-driven penalty recipe.
    #[arg(long, conflicts_with_all = ["lambda", "mu", "tail_t"])]
    alpha: Option<f64>,
    /// Explicit l1 penalty; requires --mu.
    #[arg(long, requires = "mu", conflicts_with = "tail_t")]
    lambda: Option<f64>,
    /// Explicit fusion penalty; requires --lambda.
    #[arg(long, requires = "lambda")]
    mu: Option<f64>,
    /// Tail-probability parameter for the theoretical penalty recipe.
    #[arg(long = "tail-t")]
    tail_t: Option<f64>,
    /// Fusion strength divisor in the data-driven recipe.
    #[arg(long = "K", default_value_t = 1.0)]
    k: f64,
    /// Sample-size exponent damping the fusion penalty.
    #[arg(long, default_value_t = 0.25)]
    beta0: f64,
    /// Edge combination rule: union or intersection.
    #[arg(long, default_value = "union")]
    rule: String,
    /// Coefficient magnitude threshold for neighborhood membership.
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,
    /// Solver convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Solver iteration cap per node.
    #[arg(long = "max-iter", default_value_t = 100_000)]
    max_iter: usize,
    /// Use the average noise scale across nodes instead of per-node scales.
    #[arg(long = "shared-sigma")]
    shared_sigma: bool,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// The keyword "chain" or a path to a model JSON document.
    #[arg(long)]
    model: String,
    /// Number of variables (chain model only).
    #[arg(long)]
    p: Option<usize>,
    /// Partial correlation on consecutive pairs (chain model only).
    #[arg(long)]
    rho: Option<f64>,
    /// Extra long-range edges: "default" or an edge list file (chain only).
    #[arg(long)]
    distant: Option<String>,
    /// Number of observations to draw.
    #[arg(long)]
    n: usize,
    /// RNG seed; equal seeds give byte-identical output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path for the sample.
    #[arg(long = "out-data")]
    out_data: PathBuf,
    /// Output JSON path for the generating model.
    #[arg(long = "out-model")]
    out_model: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Benchmark config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path for the summary table.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV path for per-edge selection counts.
    #[arg(long = "out-freq")]
    out_freq: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Model JSON document.
    #[arg(long)]
    model: PathBuf,
    /// Override the document's local graph: edge list file or "chain".
    #[arg(long = "local-graph")]
    local_graph: Option<String>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KktArgs {
    /// Fit JSON produced by the fit command.
    #[arg(long)]
    fit: PathBuf,
    /// The CSV data matrix the fit was computed from.
    #[arg(long)]
    data: PathBuf,
    /// The local graph the fit was computed with.
    #[arg(long = "local-graph")]
    local_graph: String,
    /// Maximum acceptable stationarity violation.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Fit(a) => {
            let penalty = match (a.alpha, a.lambda, a.mu, a.tail_t) {
                (None, Some(lambda), Some(mu), None) => PenaltyFlag::Explicit { lambda, mu },
                (None, None, None, Some(t)) => PenaltyFlag::TailBound(t),
                (alpha, None, None, None) => PenaltyFlag::Alpha(alpha.unwrap_or(0.05)),
                // clap's conflict rules make the remaining combinations
                // unreachable, but keep a real error in case they loosen
                _ => return Err(CliError::parse("choose one of --alpha, --lambda/--mu, --tail-t")),
            };
            cmd_fit(FitOptions {
                data: a.data,
                local_graph: a.local_graph,
                penalty,
                k: a.k,
                beta0: a.beta0,
                rule: a.rule,
                tau: a.tau,
                tol: a.tol,
                max_iter: a.max_iter,
                shared_sigma: a.shared_sigma,
                out: a.out,
            })
        }
        Cmd::Simulate(a) => cmd_simulate(SimulateOptions {
            model: a.model,
            p: a.p,
            rho: a.rho,
            distant: a.distant,
            n: a.n,
            seed: a.seed,
            out_data: a.out_data,
            out_model: a.out_model,
        }),
        Cmd::Benchmark(a) => cmd_benchmark(BenchmarkOptions {
            config: a.config,
            out: a.out,
            out_freq: a.out_freq,
        }),
        Cmd::Check(a) => cmd_check(CheckOptions {
            model: a.model,
            local_graph: a.local_graph,
            out: a.out,
        }),
        Cmd::Kkt(a) => cmd_kkt(KktOptions {
            fit: a.fit,
            data: a.data,
            local_graph: a.local_graph,
            tol: a.tol,
        }),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // a second build_global in the same process is a no-op; fine here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {}", err.message);
        process::exit(err.code);
    }
}
