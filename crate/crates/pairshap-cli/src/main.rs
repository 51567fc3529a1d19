//! Command-line front end: dataset/model loading, pair selection, batch
//! explanation, diagnostics, perturbation tests, benchmarking, and synthetic
//! data generation, with deterministic machine-readable outputs.

mod commands;
mod config;
mod errors;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use errors::CliResult;

#[derive(Parser)]
#[command(
    name = "pairshap",
    about = "Pairwise Shapley attribution engine with feature-removal baselines and diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that reads a dataset.
#[derive(Args, Clone)]
struct DatasetArgs {
    /// Background dataset CSV (header row required).
    #[arg(long)]
    dataset: PathBuf,
    /// Name of the target column to split off, if present.
    #[arg(long)]
    target: Option<String>,
    /// Feature-kind overrides, e.g. "grade=continuous,view=binary".
    #[arg(long)]
    kinds: Option<String>,
    /// Keep only the first N rows.
    #[arg(long)]
    limit: Option<usize>,
}

/// Flags shared by every command that needs a predictor.
#[derive(Args, Clone)]
struct ModelArgs {
    /// Model JSON document.
    #[arg(long, conflicts_with = "external_cmd")]
    model: Option<PathBuf>,
    /// External predictor command speaking the line protocol.
    #[arg(long)]
    external_cmd: Option<String>,
    /// Explain the raw score instead of the probability (strips a logistic
    /// link from the loaded model).
    #[arg(long, default_value_t = false)]
    logit: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Explain explicands and write per-explicand JSON plus an aggregate CSV.
    Explain {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Explicands CSV; defaults to the dataset rows themselves.
        #[arg(long)]
        explicands: Option<PathBuf>,
        /// Removal method: pairwise|b0|bm|uf|ma|mk|ca, inline JSON, or @file.
        #[arg(long, default_value = "pairwise")]
        method: String,
        /// Pair strategy: random|similar, inline JSON, or @file.
        #[arg(long, default_value = "similar")]
        strategy: String,
        /// Solver: auto|exact|sampled, inline JSON, or @file.
        #[arg(long, default_value = "auto")]
        solver: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the explanation batch.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-explicand waterfall CSVs keeping the top K features.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Select explicand pairs and write them as a CSV artifact.
    Pairs {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, default_value = "similar")]
        strategy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare methods: normalized samples, stats, KS matrix, monotonicity,
    /// dummy ratios, beeswarm rows.
    Diagnose {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated method list, e.g. "pairwise,ma,b0".
        #[arg(long, default_value = "pairwise,ma")]
        methods: String,
        #[arg(long, default_value = "similar")]
        strategy: String,
        #[arg(long, default_value = "auto")]
        solver: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Reuse a pairs CSV instead of selecting fresh pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Expected attribution directions, e.g. "sqft=+,noise_traffic=-".
        #[arg(long)]
        signs: Option<String>,
        /// Similarity buckets for the monotonicity-vs-similarity grid.
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-feature perturbation test (split-violin data).
    Perturb {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "pairwise")]
        method: String,
        /// Feature to perturb (must be continuous).
        #[arg(long)]
        feature: String,
        /// Delta grid "start:stop:step" (inclusive, zero dropped) or a comma
        /// list.
        #[arg(long, allow_hyphen_values = true)]
        deltas: String,
        /// Validity range "lo:hi"; perturbations leaving it are skipped.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        #[arg(long, default_value = "auto")]
        solver: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wall-clock comparison of methods on one explicand.
    Bench {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "pairwise,b0,bm,uf,ma,mk,ca")]
        methods: String,
        #[arg(long, default_value_t = 50)]
        repeats: usize,
        /// Dataset row to explain.
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value = "similar")]
        strategy: String,
        #[arg(long, default_value = "auto")]
        solver: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a JSON spec.
    Synth {
        /// SyntheticSpec JSON document.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 500)]
        rows: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference implementation of the external-predictor line protocol
    /// (linear model over stdin/stdout); used by the test suite.
    #[command(hide = true)]
    StubPredictor {
        /// Comma-separated weights.
        #[arg(long)]
        weights: String,
        #[arg(long, default_value_t = 0.0)]
        intercept: f64,
        /// Apply a logistic link to the score.
        #[arg(long, default_value_t = false)]
        logistic: bool,
        /// Exit after serving N PREDICT requests.
        #[arg(long)]
        fail_after: Option<usize>,
        /// Reply with a non-numeric token on the second line.
        #[arg(long, default_value_t = false)]
        garbage: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Explain {
            data,
            model,
            explicands,
            method,
            strategy,
            solver,
            seed,
            jobs,
            out,
            top_k,
        } => commands::explain::run(
            data, model, explicands, method, strategy, solver, seed, jobs, out, top_k,
        ),
        Command::Pairs {
            data,
            strategy,
            seed,
            out,
        } => commands::pairs::run(data, strategy, seed, out),
        Command::Diagnose {
            data,
            model,
            methods,
            strategy,
            solver,
            seed,
            pairs,
            signs,
            bins,
            jobs,
            out,
        } => commands::diagnose::run(
            data, model, methods, strategy, solver, seed, pairs, signs, bins, jobs, out,
        ),
        Command::Perturb {
            data,
            model,
            method,
            feature,
            deltas,
            range,
            solver,
            seed,
            out,
        } => commands::perturb::run(data, model, method, feature, deltas, range, solver, seed, out),
        Command::Bench {
            data,
            model,
            methods,
            repeats,
            row,
            strategy,
            solver,
            seed,
            out,
        } => commands::bench::run(
            data, model, methods, repeats, row, strategy, solver, seed, out,
        ),
        Command::Synth {
            spec,
            rows,
            seed,
            out,
        } => commands::synth::run(spec, rows, seed, out),
        Command::StubPredictor {
            weights,
            intercept,
            logistic,
            fail_after,
            garbage,
        } => commands::stub::run(weights, intercept, logistic, fail_after, garbage),
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.stderr_record());
        std::process::exit(e.code());
    }
}
