//! Subcommand implementations.

pub mod bench;
pub mod diagnose;
pub mod explain;
pub mod pairs;
pub mod perturb;
pub mod stub;
pub mod synth;

use std::path::Path;
use std::sync::Arc;

use pairshap::{Dataset, ExternalConfig, ExternalPredictor, Predictor};

use crate::config::parse_kinds;
use crate::errors::{CliError, CliResult};
use crate::{DatasetArgs, ModelArgs};

pub fn load_dataset(args: &DatasetArgs) -> CliResult<Dataset> {
    let mut ds = pairshap::load_csv(&args.dataset, args.target.as_deref())?;
    if let Some(kinds) = &args.kinds {
        ds.override_kinds(&parse_kinds(kinds)?)?;
    }
    if let Some(limit) = args.limit {
        ds = ds.truncated(limit);
    }
    if ds.n_rows() == 0 {
        return Err(CliError::Mismatch("dataset has no rows".into()));
    }
    Ok(ds)
}

pub fn build_predictor(args: &ModelArgs, dataset: &Dataset) -> CliResult<Arc<dyn Predictor>> {
    let predictor: Arc<dyn Predictor> = match (&args.model, &args.external_cmd) {
        (Some(path), None) => {
            let mut spec = pairshap::load_model_spec(path)?;
            if args.logit {
                spec = spec.strip_link();
            }
            spec.into_predictor()?
        }
        (None, Some(cmd)) => {
            if args.logit {
                return Err(CliError::Config(
                    "--logit is not available for external predictors".into(),
                ));
            }
            let command: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
            Arc::new(ExternalPredictor::spawn(ExternalConfig::new(command))?)
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --model or --external-cmd is required".into(),
            ))
        }
    };
    if predictor.feature_count() != dataset.n_features() {
        return Err(CliError::Mismatch(format!(
            "model expects {} features, dataset provides {}",
            predictor.feature_count(),
            dataset.n_features()
        )));
    }
    if let Some(names) = predictor.feature_names() {
        if names != dataset.names() {
            return Err(CliError::Mismatch(format!(
                "model feature names {:?} do not match dataset {:?}",
                names,
                dataset.names()
            )));
        }
    }
    Ok(predictor)
}

/// Run a closure inside a rayon pool capped at `jobs` workers.
pub fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T>
where
    T: Send,
{
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Load a pairs CSV (target_row, reference_row, ...) back into explicand
/// pairs over `dataset`, re-deriving masks from the rows themselves.
pub fn load_pairs_csv(
    path: &Path,
    dataset: &Dataset,
) -> CliResult<Vec<(usize, pairshap::ExplicandPair)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("pairs csv: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ti, ri) = match (col("target_row"), col("reference_row")) {
        (Some(t), Some(r)) => (t, r),
        _ => {
            return Err(CliError::Config(
                "pairs csv needs target_row and reference_row columns".into(),
            ))
        }
    };
    let si = col("similarity");
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("pairs csv: {e}")))?;
        let parse_idx = |c: usize| -> CliResult<usize> {
            record[c]
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("pairs csv line {line}: bad index")))
        };
        let t = parse_idx(ti)?;
        let r = parse_idx(ri)?;
        if t >= dataset.n_rows() || r >= dataset.n_rows() {
            return Err(CliError::Mismatch(format!(
                "pairs csv line {line}: row index out of range"
            )));
        }
        let similarity = si.and_then(|c| record[c].trim().parse::<f64>().ok());
        out.push((
            t,
            pairshap::ExplicandPair::new(
                dataset.row(t).to_vec(),
                dataset.row(r).to_vec(),
                r,
                similarity,
            ),
        ));
    }
    if out.is_empty() {
        return Err(CliError::Config("pairs csv has no rows".into()));
    }
    Ok(out)
}
