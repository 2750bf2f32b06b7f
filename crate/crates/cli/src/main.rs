//! `mfgp`: train, predict, sample and benchmark multi-fidelity GP models
//! with moment-matched effective kernels.
//!
//! Exit codes: 0 success, 1 numerical/runtime failure, 2 usage or
//! configuration error. All commands are deterministic given their full
//! flag set; wall-clock timings go to stderr only.

mod artifact;
mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfgp::GpError;

#[derive(Parser)]
#[command(name = "mfgp", version, about = "Multi-fidelity GP regression via effective kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Named dataset generator (synthetic-a, synthetic-b, denoising,
    /// borehole, branin, comp-identity, comp-tanh, comp-sin4, comp-sin8)
    #[arg(long)]
    generator: Option<String>,
    /// Dataset CSV (columns x_1..x_d, y, fidelity_level)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the generator's low-fidelity sample count
    #[arg(long)]
    n_low: Option<usize>,
    /// Override the generator's mid-fidelity sample count (branin only)
    #[arg(long)]
    n_mid: Option<usize>,
    /// Override the generator's high-fidelity sample count
    #[arg(long)]
    n_high: Option<usize>,
    /// Noise std for the comp-* low-fidelity observations
    #[arg(long)]
    low_noise: Option<f64>,
    /// Observation-noise std applied to every level of the borehole and
    /// branin generators (raw output units)
    #[arg(long)]
    obs_noise: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct TrainOpts {
    /// Training mode
    #[arg(long, default_value = "sequential", value_parser = ["sequential", "joint"])]
    mode: String,
    /// Optimizer
    #[arg(long, default_value = "quasi-newton", value_parser = ["quasi-newton", "gradient-descent"])]
    optimizer: String,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Initialization strategy
    #[arg(long = "init", default_value = "log-uniform", value_parser = ["fixed", "log-uniform"])]
    init_strategy: String,
    /// Convergence tolerance on the gradient infinity norm
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Seed for optimizer restarts
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a conditional multi-fidelity model and write a model artifact
    Train {
        #[command(flatten)]
        source: SourceArgs,
        /// Kernel composition, e.g. "SE[SE]", "SC[SE]", "SC[SC[SE]]"
        #[arg(long)]
        spec: String,
        #[command(flatten)]
        opts: TrainOpts,
        /// Rescale inputs to the unit box and z-score outputs before fitting
        #[arg(long)]
        standardize: bool,
        /// Model artifact output path
        #[arg(long)]
        out: PathBuf,
        /// Optional metrics record (key,value CSV)
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Evaluate a trained model at query points
    Predict {
        /// Model artifact written by `train`
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        source: SourceArgs,
        /// 1-d query grid "start:end:count"
        #[arg(long)]
        grid: Option<String>,
        /// Query CSV with header x_1..x_d and optional trailing y column
        #[arg(long)]
        query_csv: Option<PathBuf>,
        /// Evaluate the generator's true function at the query points and
        /// append MNLL/RMSE footer records
        #[arg(long)]
        truth: bool,
        /// Predictions CSV output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw sample paths from the effective-kernel prior built on the
    /// lowest-fidelity data
    Sample {
        #[command(flatten)]
        source: SourceArgs,
        /// Two-level kernel composition, e.g. "SE[SE]"
        #[arg(long)]
        spec: String,
        /// 1-d grid "start:end:count" to sample on
        #[arg(long, default_value = "0:1:200")]
        grid: String,
        /// Number of sample paths
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Seed for the prior draws
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
        /// Outer-kernel signal variance
        #[arg(long, default_value_t = 1.0)]
        outer_variance: f64,
        /// Outer-kernel length scale
        #[arg(long, default_value_t = 1.0)]
        outer_lengthscale: f64,
        #[command(flatten)]
        opts: TrainOpts,
        /// Samples CSV output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep models x scenarios x seeds and write a metrics table
    Benchmark {
        /// Comma-separated scenarios (synthetic-a, synthetic-b, denoising,
        /// borehole, branin)
        #[arg(long)]
        scenarios: String,
        /// Number of seeds (0..n-1)
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[command(flatten)]
        opts: TrainOpts,
        /// Metrics CSV output path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            source,
            spec,
            opts,
            standardize,
            out,
            metrics,
        } => commands::train(&source, &spec, &opts, standardize, &out, metrics.as_deref()),
        Command::Predict {
            model,
            source,
            grid,
            query_csv,
            truth,
            out,
        } => commands::predict(
            &model,
            &source,
            grid.as_deref(),
            query_csv.as_deref(),
            truth,
            &out,
        ),
        Command::Sample {
            source,
            spec,
            grid,
            n,
            sample_seed,
            outer_variance,
            outer_lengthscale,
            opts,
            out,
        } => commands::sample(
            &source,
            &spec,
            &grid,
            n,
            sample_seed,
            outer_variance,
            outer_lengthscale,
            &opts,
            &out,
        ),
        Command::Benchmark {
            scenarios,
            seeds,
            opts,
            out,
        } => commands::benchmark(&scenarios, seeds, &opts, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 2 for usage/configuration problems, 1 for numerical or runtime failures.
fn exit_code_for(e: &GpError) -> u8 {
    match e {
        GpError::InvalidConfig(_)
        | GpError::Parse { .. }
        | GpError::InvalidData(_)
        | GpError::ShapeMismatch { .. }
        | GpError::ScalarInputsRequired { .. }
        | GpError::NonPositiveParameter { .. } => 2,
        GpError::CholeskyFailure { .. }
        | GpError::SingularMatrix
        | GpError::NotPsd(_)
        | GpError::NonFinite { .. }
        | GpError::ModelMismatch(_)
        | GpError::Io(_) => 1,
    }
}
