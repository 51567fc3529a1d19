//! Tabular datasets: CSV ingestion, validation, feature statistics,
//! standardization, and a seeded synthetic generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a feature's values behave. A column is binary iff every observed
/// value is exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

/// Column-named feature matrix with optional target column. Immutable after
/// construction; rows are validated to be rectangular and finite.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    rows: Vec<Vec<f64>>,
    target: Option<Vec<f64>>,
    target_name: Option<String>,
}

impl Dataset {
    /// Build a dataset with explicit feature kinds, validating every invariant.
    pub fn new(
        names: Vec<String>,
        kinds: Vec<FeatureKind>,
        rows: Vec<Vec<f64>>,
        target: Option<Vec<f64>>,
    ) -> Result<Self> {
        if kinds.len() != names.len() {
            return Err(Error::FeatureMismatch {
                detail: format!("{} kinds for {} names", kinds.len(), names.len()),
            });
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateHeader { name: name.clone() });
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::RaggedRow {
                    row: r,
                    found: row.len(),
                    expected: names.len(),
                });
            }
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteCell {
                        row: r,
                        column: names[c].clone(),
                    });
                }
                if kinds[c] == FeatureKind::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(Error::FeatureMismatch {
                        detail: format!(
                            "column {:?} declared binary but row {} holds {}",
                            names[c], r, v
                        ),
                    });
                }
            }
        }
        if let Some(t) = &target {
            if t.len() != rows.len() {
                return Err(Error::FeatureMismatch {
                    detail: format!("target length {} for {} rows", t.len(), rows.len()),
                });
            }
            if let Some(bad) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCell {
                    row: bad,
                    column: "<target>".into(),
                });
            }
        }
        Ok(Self {
            names,
            kinds,
            rows,
            target,
            target_name: None,
        })
    }

    /// Build a dataset inferring kinds from the data.
    pub fn infer(names: Vec<String>, rows: Vec<Vec<f64>>, target: Option<Vec<f64>>) -> Result<Self> {
        let kinds = infer_kinds(names.len(), &rows);
        Self::new(names, kinds, rows, target)
    }

    pub fn with_target_name(mut self, name: impl Into<String>) -> Self {
        self.target_name = Some(name.into());
        self
    }

    /// Override inferred kinds for selected columns.
    pub fn override_kinds(&mut self, overrides: &[(String, FeatureKind)]) -> Result<()> {
        for (name, kind) in overrides {
            let idx = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownColumn { name: name.clone() })?;
            if *kind == FeatureKind::Binary {
                for (r, row) in self.rows.iter().enumerate() {
                    let v = row[idx];
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::FeatureMismatch {
                            detail: format!(
                                "column {name:?} cannot be binary: row {r} holds {v}"
                            ),
                        });
                    }
                }
            }
            self.kinds[idx] = *kind;
        }
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn target_name(&self) -> Option<&str> {
        self.target_name.as_deref()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn { name: name.into() })
    }

    /// Column values as a fresh vector.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Keep only the first `n` rows (and target entries).
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.rows.len());
        Dataset {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            rows: self.rows[..n].to_vec(),
            target: self.target.as_ref().map(|t| t[..n].to_vec()),
            target_name: self.target_name.clone(),
        }
    }
}

fn infer_kinds(n_features: usize, rows: &[Vec<f64>]) -> Vec<FeatureKind> {
    (0..n_features)
        .map(|c| {
            let binary = !rows.is_empty()
                && rows.iter().all(|r| r[c] == 0.0 || r[c] == 1.0);
            if binary {
                FeatureKind::Binary
            } else {
                FeatureKind::Continuous
            }
        })
        .collect()
}

/// Per-feature summary statistics used for scaling, baseline imputation,
/// and uniform sampling ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureStats {
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub std: Vec<f64>,
}

/// Compute per-feature min/max/mean/median/std (population std; even-count
/// medians use the midpoint of the two middle values).
pub fn compute_stats(d: &Dataset) -> Result<FeatureStats> {
    if d.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = d.n_rows() as f64;
    let mut min = Vec::with_capacity(d.n_features());
    let mut max = Vec::with_capacity(d.n_features());
    let mut mean = Vec::with_capacity(d.n_features());
    let mut median = Vec::with_capacity(d.n_features());
    let mut std = Vec::with_capacity(d.n_features());
    for c in 0..d.n_features() {
        let mut col = d.column(c);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mu = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        col.sort_by(|a, b| a.total_cmp(b));
        let med = if col.len() % 2 == 1 {
            col[col.len() / 2]
        } else {
            (col[col.len() / 2 - 1] + col[col.len() / 2]) / 2.0
        };
        min.push(lo);
        max.push(hi);
        mean.push(mu);
        median.push(med);
        std.push(var.sqrt());
    }
    Ok(FeatureStats {
        names: d.names().to_vec(),
        kinds: d.kinds().to_vec(),
        min,
        max,
        mean,
        median,
        std,
    })
}

/// Standardize one value of feature `idx` under `stats`. Binary features pass
/// through; zero-std features map to 0.
pub fn standardize_value(stats: &FeatureStats, idx: usize, v: f64) -> f64 {
    match stats.kinds[idx] {
        FeatureKind::Binary => v,
        FeatureKind::Continuous => {
            if stats.std[idx] == 0.0 {
                0.0
            } else {
                (v - stats.mean[idx]) / stats.std[idx]
            }
        }
    }
}

/// Standardize a full row under `stats`.
pub fn standardize_row(stats: &FeatureStats, row: &[f64]) -> Vec<f64> {
    row.iter()
        .enumerate()
        .map(|(i, &v)| standardize_value(stats, i, v))
        .collect()
}

/// Transform continuous features to (v - mean)/std; binary features and
/// zero-std features are handled per `standardize_value`.
pub fn standardize(d: &Dataset, stats: &FeatureStats) -> Result<Dataset> {
    if d.names() != stats.names.as_slice() {
        return Err(Error::FeatureMismatch {
            detail: "stats were computed for different feature names".into(),
        });
    }
    let rows = d
        .rows()
        .iter()
        .map(|r| standardize_row(stats, r))
        .collect();
    Dataset::new(
        d.names().to_vec(),
        d.kinds().to_vec(),
        rows,
        d.target().map(|t| t.to_vec()),
    )
}

/// Load an RFC-4180-style CSV with a header row. All cells must parse as
/// finite numbers; `target_column`, when given, is split out of the matrix.
pub fn load_csv(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(Error::DuplicateHeader { name: h.clone() });
        }
    }
    let target_idx = match target_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::UnknownColumn { name: name.into() })?,
        ),
        None => None,
    };

    let mut rows = Vec::new();
    let mut target = target_idx.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row: r,
                found: record.len(),
                expected: headers.len(),
            });
        }
        let mut row = Vec::with_capacity(headers.len().saturating_sub(1));
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                row: r,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCell {
                    row: r,
                    column: headers[c].clone(),
                });
            }
            if Some(c) == target_idx {
                target.as_mut().expect("target allocated").push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }

    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut ds = Dataset::infer(names, rows, target)?;
    if let Some(name) = target_column {
        ds = ds.with_target_name(name);
    }
    Ok(ds)
}

/// Write a dataset back to CSV. Floats use shortest-round-trip formatting, so
/// `load_csv(write_csv(d))` reproduces `d` exactly.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header: Vec<String> = d.names().to_vec();
    if d.target().is_some() {
        header.push(d.target_name().unwrap_or("target").to_string());
    }
    writer.write_record(&header).map_err(|e| Error::Csv {
        path: path_str.clone(),
        message: e.to_string(),
    })?;
    for (r, row) in d.rows().iter().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if let Some(t) = d.target() {
            record.push(format!("{}", t[r]));
        }
        writer.write_record(&record).map_err(|e| Error::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| Error::Csv {
        path: path_str,
        message: e.to_string(),
    })?;
    Ok(())
}

/// Distribution parameters for one synthetic feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticFeature {
    /// Uniform on [low, high).
    Continuous { name: String, low: f64, high: f64 },
    /// Bernoulli with success probability `p`.
    Binary { name: String, p: f64 },
}

impl SyntheticFeature {
    pub fn name(&self) -> &str {
        match self {
            SyntheticFeature::Continuous { name, .. } => name,
            SyntheticFeature::Binary { name, .. } => name,
        }
    }
}

/// Additive target definition: intercept + sum(weights * x) + N(0, noise_std).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticTarget {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub noise_std: f64,
}

/// Declarative description of a synthetic dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub features: Vec<SyntheticFeature>,
    #[serde(default)]
    pub target: Option<SyntheticTarget>,
}

impl SyntheticSpec {
    /// Continuous features x0..x{n-1} uniform on [0, 1), no target.
    pub fn uniform(n_features: usize) -> Self {
        Self {
            features: (0..n_features)
                .map(|i| SyntheticFeature::Continuous {
                    name: format!("x{i}"),
                    low: 0.0,
                    high: 1.0,
                })
                .collect(),
            target: None,
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.features.len() != n_features {
            return Err(Error::InvalidSyntheticSpec {
                detail: format!(
                    "spec declares {} features, requested {}",
                    self.features.len(),
                    n_features
                ),
            });
        }
        if n_features < 2 {
            return Err(Error::InvalidSyntheticSpec {
                detail: "need at least 2 features".into(),
            });
        }
        for f in &self.features {
            match f {
                SyntheticFeature::Continuous { name, low, high } => {
                    if !(low.is_finite() && high.is_finite()) || low >= high {
                        return Err(Error::InvalidSyntheticSpec {
                            detail: format!("feature {name:?}: range [{low}, {high}) is empty"),
                        });
                    }
                }
                SyntheticFeature::Binary { name, p } => {
                    if !(0.0..=1.0).contains(p) {
                        return Err(Error::InvalidSyntheticSpec {
                            detail: format!("feature {name:?}: probability {p} outside [0, 1]"),
                        });
                    }
                }
            }
        }
        if let Some(t) = &self.target {
            if t.weights.len() != n_features {
                return Err(Error::InvalidSyntheticSpec {
                    detail: format!(
                        "target has {} weights for {} features",
                        t.weights.len(),
                        n_features
                    ),
                });
            }
            if t.noise_std < 0.0 {
                return Err(Error::InvalidSyntheticSpec {
                    detail: "noise_std must be >= 0".into(),
                });
            }
        }
        Ok(())
    }
}

/// Generate a dataset from `spec`, deterministic for a fixed seed.
pub fn generate_synthetic(
    n_rows: usize,
    n_features: usize,
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<Dataset> {
    spec.validate(n_features)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row: Vec<f64> = spec
            .features
            .iter()
            .map(|f| match f {
                SyntheticFeature::Continuous { low, high, .. } => {
                    low + (high - low) * rng.random::<f64>()
                }
                SyntheticFeature::Binary { p, .. } => {
                    if rng.random::<f64>() < *p {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        rows.push(row);
    }
    let target = spec.target.as_ref().map(|t| {
        rows.iter()
            .map(|row| {
                let lin: f64 = t.intercept
                    + row
                        .iter()
                        .zip(&t.weights)
                        .map(|(x, w)| w * x)
                        .sum::<f64>();
                if t.noise_std > 0.0 {
                    lin + t.noise_std * standard_normal(&mut rng)
                } else {
                    lin
                }
            })
            .collect()
    });
    let names = spec.features.iter().map(|f| f.name().to_string()).collect();
    let kinds = spec
        .features
        .iter()
        .map(|f| match f {
            SyntheticFeature::Continuous { .. } => FeatureKind::Continuous,
            SyntheticFeature::Binary { .. } => FeatureKind::Binary,
        })
        .collect();
    let mut ds = Dataset::new(names, kinds, rows, target)?;
    if spec.target.is_some() {
        ds = ds.with_target_name("y");
    }
    Ok(ds)
}

/// Box-Muller draw from N(0, 1).
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
