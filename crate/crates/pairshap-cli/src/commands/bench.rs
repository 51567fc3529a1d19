//! `bench`: wall-clock comparison of removal methods on one explicand.
//! Timing fields live in their own columns/keys so determinism checks can
//! mask them.

use std::path::PathBuf;

use serde_json::json;

use pairshap::diagnostics::benchmark;

use crate::config::{parse_methods, parse_solver, parse_strategy, resolve_seed};
use crate::errors::{CliError, CliResult};
use crate::output::{ensure_out_dir, fmt, write_csv_rows, write_json, write_run_config};
use crate::{DatasetArgs, ModelArgs};

#[allow(clippy::too_many_arguments)]
pub fn run(
    data: DatasetArgs,
    model_args: ModelArgs,
    methods_raw: String,
    repeats: usize,
    row: usize,
    strategy_raw: String,
    solver_raw: String,
    seed_flag: Option<u64>,
    out: PathBuf,
) -> CliResult<()> {
    let seed = resolve_seed(seed_flag);
    let methods = parse_methods(&methods_raw)?;
    let strategy = parse_strategy(&strategy_raw, seed)?;
    let solver = parse_solver(&solver_raw, seed)?;
    let dataset = super::load_dataset(&data)?;
    let predictor = super::build_predictor(&model_args, &dataset)?;
    if row >= dataset.n_rows() {
        return Err(CliError::Mismatch(format!(
            "row {row} out of range ({} rows)",
            dataset.n_rows()
        )));
    }

    let results = benchmark(
        &methods,
        dataset.row(row),
        Some(row),
        &dataset,
        predictor.as_ref(),
        &strategy,
        &solver,
        repeats,
        seed,
    )?;

    ensure_out_dir(&out)?;
    write_run_config(
        &out,
        &json!({
            "command": "bench",
            "dataset": data.dataset.display().to_string(),
            "target": data.target,
            "kinds": data.kinds,
            "limit": data.limit,
            "model": model_args.model.as_ref().map(|p| p.display().to_string()),
            "external_cmd": model_args.external_cmd,
            "logit": model_args.logit,
            "methods": methods,
            "repeats": repeats,
            "row": row,
            "strategy": strategy,
            "solver": solver,
            "seed": seed,
        }),
    )?;

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.repeats.to_string(),
                r.n_evaluations.to_string(),
                fmt(r.mean.as_secs_f64() * 1e3),
                fmt(r.std_dev.as_secs_f64() * 1e3),
            ]
        })
        .collect();
    write_csv_rows(
        &out.join("bench.csv"),
        &["method", "repeats", "n_evaluations", "mean_ms", "std_ms"],
        &rows,
    )?;
    let json_rows: Vec<serde_json::Value> = results
        .iter()
        .map(|r| {
            json!({
                "method": r.method,
                "repeats": r.repeats,
                "n_evaluations": r.n_evaluations,
                "mean_ms": r.mean.as_secs_f64() * 1e3,
                "std_ms": r.std_dev.as_secs_f64() * 1e3,
            })
        })
        .collect();
    write_json(&out.join("bench.json"), &json!({"results": json_rows}))?;

    for r in &results {
        println!(
            "{:>9}  mean {:>10.3} ms  std {:>8.3} ms  rows {}",
            r.method,
            r.mean.as_secs_f64() * 1e3,
            r.std_dev.as_secs_f64() * 1e3,
            r.n_evaluations
        );
    }
    Ok(())
}
