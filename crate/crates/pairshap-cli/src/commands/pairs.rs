//! `pairs`: select a reference for every dataset row and write the pair list
//! as a reusable CSV artifact.

use std::path::PathBuf;

use serde_json::json;

use pairshap::select_pairs_batch;

use crate::config::{parse_strategy, resolve_seed};
use crate::errors::CliResult;
use crate::output::{ensure_out_dir, fmt, write_csv_rows, write_run_config};
use crate::DatasetArgs;

pub fn run(
    data: DatasetArgs,
    strategy_raw: String,
    seed_flag: Option<u64>,
    out: PathBuf,
) -> CliResult<()> {
    let seed = resolve_seed(seed_flag);
    let strategy = parse_strategy(&strategy_raw, seed)?;
    let dataset = super::load_dataset(&data)?;
    let pairs = select_pairs_batch(&dataset, &dataset, &strategy, true)?;

    ensure_out_dir(&out)?;
    write_run_config(
        &out,
        &json!({
            "command": "pairs",
            "dataset": data.dataset.display().to_string(),
            "target": data.target,
            "kinds": data.kinds,
            "limit": data.limit,
            "strategy": strategy,
            "seed": seed,
        }),
    )?;
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                i.to_string(),
                p.reference_row.to_string(),
                p.similarity.map(fmt).unwrap_or_default(),
                p.n_dummies().to_string(),
                (p.fallback as u8).to_string(),
            ]
        })
        .collect();
    write_csv_rows(
        &out.join("pairs.csv"),
        &["target_row", "reference_row", "similarity", "n_dummy", "fallback"],
        &rows,
    )?;
    println!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}
