//! `perturb`: single-feature perturbation test producing split-violin rows
//! (prediction deltas vs attribution deltas).

use std::path::PathBuf;

use serde_json::json;

use pairshap::diagnostics::{ks_test, perturbation_test};

use crate::config::{parse_deltas, parse_method, parse_range, parse_solver, resolve_seed};
use crate::errors::CliResult;
use crate::output::{ensure_out_dir, fmt, write_csv_rows, write_json, write_run_config};
use crate::{DatasetArgs, ModelArgs};

#[allow(clippy::too_many_arguments)]
pub fn run(
    data: DatasetArgs,
    model_args: ModelArgs,
    method_raw: String,
    feature: String,
    deltas_raw: String,
    range_raw: Option<String>,
    solver_raw: String,
    seed_flag: Option<u64>,
    out: PathBuf,
) -> CliResult<()> {
    let seed = resolve_seed(seed_flag);
    let method = parse_method(&method_raw)?;
    let solver = parse_solver(&solver_raw, seed)?;
    let deltas = parse_deltas(&deltas_raw)?;
    let validity = range_raw.as_deref().map(parse_range).transpose()?;
    let dataset = super::load_dataset(&data)?;
    let predictor = super::build_predictor(&model_args, &dataset)?;
    let feature_idx = dataset.feature_index(&feature)?;

    let outcome = perturbation_test(
        &dataset,
        feature_idx,
        &deltas,
        &method,
        &dataset,
        predictor.as_ref(),
        &solver,
        validity,
        seed,
    )?;

    ensure_out_dir(&out)?;
    write_run_config(
        &out,
        &json!({
            "command": "perturb",
            "dataset": data.dataset.display().to_string(),
            "target": data.target,
            "kinds": data.kinds,
            "limit": data.limit,
            "model": model_args.model.as_ref().map(|p| p.display().to_string()),
            "external_cmd": model_args.external_cmd,
            "logit": model_args.logit,
            "method": method,
            "feature": feature,
            "deltas": deltas,
            "range": validity,
            "solver": solver,
            "seed": seed,
        }),
    )?;

    let rows: Vec<Vec<String>> = outcome
        .records
        .iter()
        .map(|r| {
            vec![
                r.row.to_string(),
                fmt(r.delta),
                fmt(r.prediction_delta),
                fmt(r.attribution_delta),
            ]
        })
        .collect();
    write_csv_rows(
        &out.join("perturbation.csv"),
        &["row", "delta", "prediction_delta", "attribution_delta"],
        &rows,
    )?;

    // Distribution-level summary of the two violin sides.
    let preds: Vec<f64> = outcome.records.iter().map(|r| r.prediction_delta).collect();
    let attrs: Vec<f64> = outcome
        .records
        .iter()
        .map(|r| r.attribution_delta)
        .collect();
    let ks = if preds.is_empty() {
        None
    } else {
        Some(ks_test(&preds, &attrs)?)
    };
    write_json(
        &out.join("perturbation_summary.json"),
        &json!({
            "method": method.tag(),
            "feature": feature,
            "n_records": outcome.records.len(),
            "skipped": outcome.skipped,
            "ks": ks.map(|k| json!({"d": k.d, "p_value": k.p_value})),
        }),
    )?;
    println!(
        "wrote {} perturbation records ({} skipped) to {}",
        outcome.records.len(),
        outcome.skipped,
        out.display()
    );
    Ok(())
}
