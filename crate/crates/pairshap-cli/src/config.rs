//! Flag-value parsing: method/strategy/solver specs (shorthand name, inline
//! JSON, or @file), delta grids, sign declarations, kind overrides.

use std::collections::BTreeMap;

use pairshap::diagnostics::ExpectedSign;
use pairshap::{FeatureKind, MethodConfig, Metric, PairStrategy, SolverConfig};

use crate::errors::{CliError, CliResult};

/// Global seed: the flag wins, then PAIRSHAP_SEED, then 0.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("PAIRSHAP_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

/// Expand "@file" references and pass through inline text.
fn spec_text(raw: &str) -> CliResult<String> {
    if let Some(path) = raw.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))
    } else {
        Ok(raw.to_string())
    }
}

pub fn parse_method(raw: &str) -> CliResult<MethodConfig> {
    let text = spec_text(raw)?;
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        serde_json::from_str(trimmed)
            .map_err(|e| CliError::Config(format!("bad method spec: {e}")))
    } else {
        // Shorthand method names with default parameters.
        match trimmed {
            "pairwise" => Ok(MethodConfig::Pairwise),
            "b0" => Ok(MethodConfig::B0),
            "bm" => Ok(MethodConfig::Bm),
            "uf" => Ok(MethodConfig::Uf {
                n_samples: 100,
                seed: None,
            }),
            "ma" => Ok(MethodConfig::Ma {
                n_background: 100,
                seed: None,
            }),
            "mk" => Ok(MethodConfig::Mk { k: 10, seed: None }),
            "ca" => Ok(MethodConfig::Ca {
                n_samples: 100,
                sigma: 0.1,
            }),
            other => Err(CliError::Config(format!("unknown method {other:?}"))),
        }
    }
}

pub fn parse_methods(raw: &str) -> CliResult<Vec<MethodConfig>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_method)
        .collect()
}

pub fn parse_strategy(raw: &str, seed: u64) -> CliResult<PairStrategy> {
    let text = spec_text(raw)?;
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        serde_json::from_str(trimmed)
            .map_err(|e| CliError::Config(format!("bad strategy spec: {e}")))
    } else {
        match trimmed {
            "random" => Ok(PairStrategy::random(seed)),
            "similar" => Ok(PairStrategy::similar(Metric::Euclidean)),
            "comparable" => Err(CliError::Config(
                "comparable strategy needs a JSON spec with conditions".into(),
            )),
            other => Err(CliError::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

pub fn parse_solver(raw: &str, seed: u64) -> CliResult<SolverConfig> {
    let text = spec_text(raw)?;
    let trimmed = text.trim();
    let mut cfg: SolverConfig = if trimmed.starts_with('{') {
        serde_json::from_str(trimmed)
            .map_err(|e| CliError::Config(format!("bad solver spec: {e}")))?
    } else {
        match trimmed {
            "auto" => SolverConfig::default(),
            "exact" => SolverConfig::exact(),
            "sampled" => SolverConfig::sampled(2048, seed),
            other => return Err(CliError::Config(format!("unknown solver {other:?}"))),
        }
    };
    if cfg.seed.is_none() {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

/// Delta grid: either "start:stop:step" (inclusive, zero dropped) or a comma
/// list of explicit values.
pub fn parse_deltas(raw: &str) -> CliResult<Vec<f64>> {
    let parse_num = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad delta value {s:?}")))
    };
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() == 3 {
        let start = parse_num(parts[0])?;
        let stop = parse_num(parts[1])?;
        let step = parse_num(parts[2])?;
        if step <= 0.0 || stop < start {
            return Err(CliError::Config(format!("bad delta grid {raw:?}")));
        }
        let mut out = Vec::new();
        let n = ((stop - start) / step).round() as i64;
        for i in 0..=n {
            let v = start + step * i as f64;
            if v != 0.0 {
                out.push(v);
            }
        }
        if out.is_empty() {
            return Err(CliError::Config("delta grid is empty".into()));
        }
        Ok(out)
    } else {
        let out: Vec<f64> = raw
            .split(',')
            .map(parse_num)
            .collect::<CliResult<Vec<f64>>>()?;
        if out.is_empty() {
            return Err(CliError::Config("delta list is empty".into()));
        }
        Ok(out)
    }
}

/// Expected signs, "sqft=+,noise_traffic=-", keyed to feature indices.
pub fn parse_signs(raw: &str, names: &[String]) -> CliResult<BTreeMap<usize, ExpectedSign>> {
    let mut out = BTreeMap::new();
    for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, sign) = part
            .rsplit_once('=')
            .ok_or_else(|| CliError::Config(format!("bad sign declaration {part:?}")))?;
        let idx = names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| CliError::Mismatch(format!("unknown feature {name:?} in --signs")))?;
        let sign = match sign.trim() {
            "+" | "pos" | "positive" => ExpectedSign::Positive,
            "-" | "neg" | "negative" => ExpectedSign::Negative,
            other => return Err(CliError::Config(format!("bad sign {other:?}"))),
        };
        out.insert(idx, sign);
    }
    if out.is_empty() {
        return Err(CliError::Config("no signs declared".into()));
    }
    Ok(out)
}

/// Kind overrides, "city_BELLEVUE=binary,grade=continuous".
pub fn parse_kinds(raw: &str) -> CliResult<Vec<(String, FeatureKind)>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|part| {
            let (name, kind) = part
                .rsplit_once('=')
                .ok_or_else(|| CliError::Config(format!("bad kind override {part:?}")))?;
            let kind = match kind.trim() {
                "binary" => FeatureKind::Binary,
                "continuous" => FeatureKind::Continuous,
                other => return Err(CliError::Config(format!("bad kind {other:?}"))),
            };
            Ok((name.trim().to_string(), kind))
        })
        .collect()
}

/// "lo:hi" validity range.
pub fn parse_range(raw: &str) -> CliResult<(f64, f64)> {
    let (lo, hi) = raw
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("bad range {raw:?}, expected lo:hi")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad range bound {lo:?}")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad range bound {hi:?}")))?;
    if lo > hi {
        return Err(CliError::Config(format!("empty range {raw:?}")));
    }
    Ok((lo, hi))
}
