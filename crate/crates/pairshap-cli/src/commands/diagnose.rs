//! `diagnose`: run several removal methods over a shared pair list and
//! report normalized-attribution statistics, a per-feature KS matrix across
//! methods, monotonicity rates, dummy-pair ratios, beeswarm rows, and an
//! optional similarity-vs-monotonicity grid.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;

use pairshap::diagnostics::{
    dist_stats, dummy_ratio, feature_values, ks_test, monotonicity, normalize_nonpairwise,
    normalize_pairwise, similarity_vs_monotonicity, NormalizedSample,
};
use pairshap::{explain_batch, explain_pair, ExplainRequest, ExplicandPair, Explanation};

use crate::config::{parse_methods, parse_signs, parse_solver, parse_strategy, resolve_seed};
use crate::errors::{CliError, CliResult};
use crate::output::{ensure_out_dir, fmt, write_csv_rows, write_json, write_run_config};
use crate::{DatasetArgs, ModelArgs};

#[allow(clippy::too_many_arguments)]
pub fn run(
    data: DatasetArgs,
    model_args: ModelArgs,
    methods_raw: String,
    strategy_raw: String,
    solver_raw: String,
    seed_flag: Option<u64>,
    pairs_file: Option<PathBuf>,
    signs_raw: Option<String>,
    bins: Option<usize>,
    jobs: Option<usize>,
    out: PathBuf,
) -> CliResult<()> {
    let seed = resolve_seed(seed_flag);
    let methods = parse_methods(&methods_raw)?;
    let strategy = parse_strategy(&strategy_raw, seed)?;
    let solver = parse_solver(&solver_raw, seed)?;
    let dataset = super::load_dataset(&data)?;
    let predictor = super::build_predictor(&model_args, &dataset)?;
    let signs = signs_raw
        .as_deref()
        .map(|s| parse_signs(s, dataset.names()))
        .transpose()?;

    // One pair list shared by every method: loaded from an artifact or
    // selected fresh (target_row = row index).
    let pairs: Vec<(usize, ExplicandPair)> = match &pairs_file {
        Some(path) => super::load_pairs_csv(path, &dataset)?,
        None => pairshap::select_pairs_batch(&dataset, &dataset, &strategy, true)?
            .into_iter()
            .enumerate()
            .collect(),
    };
    let index_pairs: Vec<(usize, usize)> =
        pairs.iter().map(|(t, p)| (*t, p.reference_row)).collect();

    struct MethodRun {
        tag: String,
        samples: Vec<NormalizedSample>,
        explanations: Vec<Explanation>,
        /// Row explained by each explanation (pair target for pairwise).
        rows: Vec<usize>,
        pairwise: bool,
    }

    let mut runs: Vec<MethodRun> = Vec::new();
    for method in &methods {
        let run = super::with_jobs(jobs, || -> CliResult<MethodRun> {
            if method.is_pairwise() {
                let explanations: Vec<Explanation> = pairs
                    .par_iter()
                    .map(|(t, pair)| {
                        explain_pair(pair.clone(), predictor.as_ref(), &solver.for_row(*t))
                            .map_err(CliError::from)
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                let only_pairs: Vec<ExplicandPair> =
                    pairs.iter().map(|(_, p)| p.clone()).collect();
                let samples = normalize_pairwise(&explanations, &only_pairs)?;
                Ok(MethodRun {
                    tag: method.tag().to_string(),
                    samples,
                    explanations,
                    rows: pairs.iter().map(|(t, _)| *t).collect(),
                    pairwise: true,
                })
            } else {
                let explanations = explain_batch(&ExplainRequest {
                    targets: &dataset,
                    background: &dataset,
                    predictor: predictor.as_ref(),
                    method,
                    strategy: &strategy,
                    solver: &solver,
                    targets_are_background: true,
                    seed,
                })?;
                let samples = normalize_nonpairwise(&explanations, &dataset, &index_pairs)?;
                Ok(MethodRun {
                    tag: method.tag().to_string(),
                    samples,
                    explanations,
                    rows: (0..dataset.n_rows()).collect(),
                    pairwise: false,
                })
            }
        })?;
        runs.push(run);
    }

    ensure_out_dir(&out)?;
    let config = json!({
        "command": "diagnose",
        "dataset": data.dataset.display().to_string(),
        "target": data.target,
        "kinds": data.kinds,
        "limit": data.limit,
        "model": model_args.model.as_ref().map(|p| p.display().to_string()),
        "external_cmd": model_args.external_cmd,
        "logit": model_args.logit,
        "methods": methods,
        "strategy": strategy,
        "solver": solver,
        "seed": seed,
        "pairs": pairs_file.as_ref().map(|p| p.display().to_string()),
        "signs": signs_raw,
        "bins": bins,
        "jobs": jobs,
    });
    write_run_config(&out, &config)?;

    // Per-method per-feature report.
    let names = dataset.names();
    let mut methods_json = serde_json::Map::new();
    for run in &runs {
        let ratios = dummy_ratio(&run.samples);
        let mono = signs.as_ref().map(|s| monotonicity(&run.samples, s));
        let mut features_json = serde_json::Map::new();
        for (k, name) in names.iter().enumerate() {
            let values = feature_values(&run.samples, k);
            let stats = if values.is_empty() {
                None
            } else {
                Some(dist_stats(&values)?)
            };
            features_json.insert(
                name.clone(),
                json!({
                    "stats": stats,
                    "dummy_ratio": ratios.get(&k),
                    "monotonicity": mono.as_ref().and_then(|m| m.get(&k)),
                }),
            );
        }
        methods_json.insert(run.tag.clone(), json!({ "features": features_json }));
    }

    // Full KS matrix per feature across methods.
    let mut ks_json = serde_json::Map::new();
    for (k, name) in names.iter().enumerate() {
        let mut per_feature = serde_json::Map::new();
        for a in &runs {
            let va = feature_values(&a.samples, k);
            let mut row = serde_json::Map::new();
            for b in &runs {
                if a.tag == b.tag {
                    continue;
                }
                let vb = feature_values(&b.samples, k);
                if va.is_empty() || vb.is_empty() {
                    continue;
                }
                let ks = ks_test(&va, &vb)?;
                row.insert(b.tag.clone(), json!({"d": ks.d, "p_value": ks.p_value}));
            }
            per_feature.insert(a.tag.clone(), serde_json::Value::Object(row));
        }
        ks_json.insert(name.clone(), serde_json::Value::Object(per_feature));
    }

    // Similarity-vs-monotonicity grid for the pairwise run, when requested.
    let grid = match (bins, &signs) {
        (Some(n_bins), Some(signs)) => {
            let mut grids = serde_json::Map::new();
            for run in runs.iter().filter(|r| r.pairwise) {
                let only_pairs: Vec<ExplicandPair> =
                    pairs.iter().map(|(_, p)| p.clone()).collect();
                // Sample pair indices refer to positions in the pair list.
                let grid = similarity_vs_monotonicity(&only_pairs, &run.samples, signs, n_bins)?;
                let named: Vec<serde_json::Value> = grid
                    .iter()
                    .map(|bin| {
                        let cells: serde_json::Map<String, serde_json::Value> = bin
                            .cells
                            .iter()
                            .map(|(k, c)| (names[*k].clone(), json!(c)))
                            .collect();
                        json!({
                            "lo": bin.lo,
                            "hi": bin.hi,
                            "n_pairs": bin.n_pairs,
                            "cells": cells,
                        })
                    })
                    .collect();
                grids.insert(run.tag.clone(), json!(named));
            }
            Some(serde_json::Value::Object(grids))
        }
        _ => None,
    };

    write_json(
        &out.join("diagnostics.json"),
        &json!({
            "methods": methods_json,
            "ks_matrix": ks_json,
            "similarity_grid": grid,
            "n_pairs": pairs.len(),
            "config": config,
        }),
    )?;

    // Raw normalized samples.
    let mut sample_rows: Vec<Vec<String>> = Vec::new();
    for run in &runs {
        for s in &run.samples {
            sample_rows.push(vec![
                run.tag.clone(),
                names[s.feature].clone(),
                s.pair.0.to_string(),
                s.pair.1.to_string(),
                fmt(s.value),
                (s.degenerate as u8).to_string(),
            ]);
        }
    }
    write_csv_rows(
        &out.join("normalized_samples.csv"),
        &["method", "feature", "pair_i", "pair_j", "value", "degenerate"],
        &sample_rows,
    )?;

    // Beeswarm rows: attribution vs feature value (relative for pairwise).
    let mut bees: Vec<Vec<String>> = Vec::new();
    for run in &runs {
        for (expl, &row) in run.explanations.iter().zip(&run.rows) {
            for (k, name) in names.iter().enumerate() {
                let value = match (&run.pairwise, &expl.pair) {
                    (true, Some(p)) => dataset.row(row)[k] - dataset.row(p.reference_row)[k],
                    _ => dataset.row(row)[k],
                };
                bees.push(vec![
                    run.tag.clone(),
                    row.to_string(),
                    name.clone(),
                    fmt(expl.phi[k]),
                    fmt(value),
                ]);
            }
        }
    }
    write_csv_rows(
        &out.join("beeswarm.csv"),
        &["method", "row", "feature", "phi", "value"],
        &bees,
    )?;

    println!(
        "diagnosed {} methods over {} pairs into {}",
        runs.len(),
        pairs.len(),
        out.display()
    );
    Ok(())
}
