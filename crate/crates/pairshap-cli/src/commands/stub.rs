//! `stub-predictor`: reference implementation of the external-predictor line
//! protocol. Reads `PREDICT <n>` plus n CSV rows from stdin and answers with
//! n prediction lines; announces itself with `READY <feature_count>`.

use std::io::{BufRead, Write};

use crate::errors::{CliError, CliResult};

pub fn run(
    weights_raw: String,
    intercept: f64,
    logistic: bool,
    fail_after: Option<usize>,
    garbage: bool,
) -> CliResult<()> {
    let weights: Vec<f64> = weights_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad weight {s:?}")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if weights.is_empty() {
        return Err(CliError::Config("need at least one weight".into()));
    }

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "READY {}", weights.len()).ok();
    out.flush().ok();

    let mut served = 0usize;
    while let Some(Ok(line)) = lines.next() {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("PREDICT") {
            continue;
        }
        let n: usize = match parts.next().and_then(|t| t.parse().ok()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(limit) = fail_after {
            if served >= limit {
                std::process::exit(1);
            }
        }
        for i in 0..n {
            let row = match lines.next() {
                Some(Ok(row)) => row,
                _ => std::process::exit(1),
            };
            let values: Vec<f64> = row
                .split(',')
                .filter_map(|c| c.trim().parse().ok())
                .collect();
            // Same accumulation order as the built-in linear model, so the
            // bridge reproduces it bit-for-bit.
            let mut z = intercept
                + weights
                    .iter()
                    .zip(&values)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            if logistic {
                z = 1.0 / (1.0 + (-z).exp());
            }
            if garbage && i == 1 {
                writeln!(out, "not-a-number").ok();
            } else {
                writeln!(out, "{z}").ok();
            }
        }
        out.flush().ok();
        served += 1;
    }
    Ok(())
}
