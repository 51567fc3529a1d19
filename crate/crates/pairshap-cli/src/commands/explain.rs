//! `explain`: batch explanation with per-explicand JSON artifacts, an
//! aggregate CSV, and optional waterfall exports.

use std::path::PathBuf;

use serde_json::json;

use pairshap::{explain_batch, waterfall, ExplainRequest, Explanation};

use crate::config::{parse_method, parse_solver, parse_strategy, resolve_seed};
use crate::errors::CliResult;
use crate::output::{ensure_out_dir, fmt, write_csv_rows, write_json, write_run_config};
use crate::{DatasetArgs, ModelArgs};

#[allow(clippy::too_many_arguments)]
pub fn run(
    data: DatasetArgs,
    model_args: ModelArgs,
    explicands: Option<PathBuf>,
    method_raw: String,
    strategy_raw: String,
    solver_raw: String,
    seed_flag: Option<u64>,
    jobs: Option<usize>,
    out: PathBuf,
    top_k: Option<usize>,
) -> CliResult<()> {
    let seed = resolve_seed(seed_flag);
    let method = parse_method(&method_raw)?;
    let strategy = parse_strategy(&strategy_raw, seed)?;
    let solver = parse_solver(&solver_raw, seed)?;
    let background = super::load_dataset(&data)?;
    let predictor = super::build_predictor(&model_args, &background)?;

    let (targets, targets_are_background) = match &explicands {
        Some(path) => {
            let mut args = data.clone();
            args.dataset = path.clone();
            (super::load_dataset(&args)?, false)
        }
        None => (background.clone(), true),
    };

    let explanations = super::with_jobs(jobs, || {
        explain_batch(&ExplainRequest {
            targets: &targets,
            background: &background,
            predictor: predictor.as_ref(),
            method: &method,
            strategy: &strategy,
            solver: &solver,
            targets_are_background,
            seed,
        })
        .map_err(Into::into)
    })?;

    ensure_out_dir(&out)?;
    let config = json!({
        "command": "explain",
        "dataset": data.dataset.display().to_string(),
        "target": data.target,
        "kinds": data.kinds,
        "limit": data.limit,
        "explicands": explicands.as_ref().map(|p| p.display().to_string()),
        "model": model_args.model.as_ref().map(|p| p.display().to_string()),
        "external_cmd": model_args.external_cmd,
        "logit": model_args.logit,
        "method": method,
        "strategy": strategy,
        "solver": solver,
        "seed": seed,
        "jobs": jobs,
        "top_k": top_k,
    });
    write_run_config(&out, &config)?;

    let names = targets.names();
    for (i, expl) in explanations.iter().enumerate() {
        let doc = explanation_json(expl, names, &config);
        write_json(&out.join(format!("explanation_{i:04}.json")), &doc)?;
        if let Some(k) = top_k {
            // Pairwise waterfalls list relative feature values (target minus
            // reference); other methods list the explicand's own values.
            let values: Vec<f64> = match &expl.pair {
                Some(p) => targets
                    .row(i)
                    .iter()
                    .zip(background.row(p.reference_row))
                    .map(|(t, r)| t - r)
                    .collect(),
                None => targets.row(i).to_vec(),
            };
            let rows = waterfall(expl, names, &values, k);
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .enumerate()
                .map(|(rank, r)| {
                    vec![
                        rank.to_string(),
                        r.feature.clone(),
                        r.value.map(fmt).unwrap_or_default(),
                        fmt(r.phi),
                    ]
                })
                .collect();
            write_csv_rows(
                &out.join(format!("waterfall_{i:04}.csv")),
                &["rank", "feature", "value", "phi"],
                &csv_rows,
            )?;
        }
    }

    let mut header: Vec<String> = vec![
        "row".into(),
        "prediction".into(),
        "phi0".into(),
        "reference_row".into(),
        "n_dummy".into(),
        "n_evaluations".into(),
    ];
    header.extend(names.iter().map(|n| format!("phi_{n}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = explanations
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut row = vec![
                i.to_string(),
                fmt(e.prediction),
                fmt(e.phi0),
                e.pair
                    .as_ref()
                    .map(|p| p.reference_row.to_string())
                    .unwrap_or_default(),
                e.pair
                    .as_ref()
                    .map(|p| p.dummy_mask.iter().filter(|d| **d).count().to_string())
                    .unwrap_or_default(),
                e.n_evaluations.to_string(),
            ];
            row.extend(e.phi.iter().map(|v| fmt(*v)));
            row
        })
        .collect();
    write_csv_rows(&out.join("explanations.csv"), &header_refs, &rows)?;
    println!(
        "wrote {} explanations ({}) to {}",
        explanations.len(),
        method.tag(),
        out.display()
    );
    Ok(())
}

/// Serialize one explanation with named attributions and the run config.
pub fn explanation_json(
    expl: &Explanation,
    names: &[String],
    config: &serde_json::Value,
) -> serde_json::Value {
    let phi: serde_json::Map<String, serde_json::Value> = names
        .iter()
        .zip(&expl.phi)
        .map(|(n, v)| (n.clone(), json!(v)))
        .collect();
    let dummy_features: Vec<&String> = match &expl.pair {
        Some(p) => names
            .iter()
            .zip(&p.dummy_mask)
            .filter(|(_, d)| **d)
            .map(|(n, _)| n)
            .collect(),
        None => Vec::new(),
    };
    json!({
        "phi0": expl.phi0,
        "phi": phi,
        "prediction": expl.prediction,
        "method": expl.method,
        "reference_row": expl.pair.as_ref().map(|p| p.reference_row),
        "similarity": expl.pair.as_ref().and_then(|p| p.similarity),
        "fallback": expl.pair.as_ref().map(|p| p.fallback),
        "dummy_features": dummy_features,
        "n_evaluations": expl.n_evaluations,
        "wall_time_ms": expl.wall_time.as_secs_f64() * 1e3,
        "warnings": expl.warnings,
        "config": config,
    })
}
