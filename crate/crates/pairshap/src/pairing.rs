//! Reference-explicand selection: random draw, metric nearest neighbour, and
//! condition-filtered ("comparable") matching over a background dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{compute_stats, standardize_row, Dataset, FeatureStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
    Correlation,
}

impl Metric {
    /// Whether larger scores mean closer vectors (false for euclidean distance).
    pub fn higher_is_closer(self) -> bool {
        !matches!(self, Metric::Euclidean)
    }
}

/// Matching rule for one feature in the comparable strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchCondition {
    pub feature: String,
    pub mode: MatchMode,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    Tolerance { tolerance: f64 },
}

fn default_standardized() -> bool {
    true
}

/// How the reference explicand is chosen for each target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum PairStrategy {
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        exclude_duplicates: bool,
    },
    Similar {
        metric: Metric,
        #[serde(default = "default_standardized")]
        standardized: bool,
        #[serde(default)]
        exclude_duplicates: bool,
    },
    Comparable {
        conditions: Vec<MatchCondition>,
        fallback_metric: Metric,
        #[serde(default = "default_standardized")]
        standardized: bool,
        #[serde(default)]
        exclude_duplicates: bool,
    },
}

impl PairStrategy {
    pub fn random(seed: u64) -> Self {
        PairStrategy::Random {
            seed,
            exclude_duplicates: false,
        }
    }

    pub fn similar(metric: Metric) -> Self {
        PairStrategy::Similar {
            metric,
            standardized: true,
            exclude_duplicates: false,
        }
    }

    fn exclude_duplicates(&self) -> bool {
        match self {
            PairStrategy::Random {
                exclude_duplicates, ..
            }
            | PairStrategy::Similar {
                exclude_duplicates, ..
            }
            | PairStrategy::Comparable {
                exclude_duplicates, ..
            } => *exclude_duplicates,
        }
    }

    fn validate(&self) -> Result<()> {
        if let PairStrategy::Comparable { conditions, .. } = self {
            if conditions.is_empty() {
                return Err(Error::InvalidConfig {
                    detail: "comparable strategy needs at least one condition".into(),
                });
            }
            for c in conditions {
                if let MatchMode::Tolerance { tolerance } = c.mode {
                    if !tolerance.is_finite() || tolerance < 0.0 {
                        return Err(Error::InvalidConfig {
                            detail: format!(
                                "condition on {:?}: tolerance must be finite and >= 0",
                                c.feature
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PairStrategy::Random { .. } => "random",
            PairStrategy::Similar { .. } => "similar",
            PairStrategy::Comparable { .. } => "comparable",
        }
    }
}

/// Metric score plus a flag for degenerate inputs (zero vector for cosine,
/// zero variance for correlation), which score 0 by definition.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityScore {
    pub value: f64,
    pub degenerate: bool,
}

/// Compute the similarity (or distance, for euclidean) between two vectors,
/// optionally after standardizing both with `stats`.
pub fn similarity(
    a: &[f64],
    b: &[f64],
    metric: Metric,
    standardized_stats: Option<&FeatureStats>,
) -> Result<SimilarityScore> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (a, b) = match standardized_stats {
        Some(stats) => (standardize_row(stats, a), standardize_row(stats, b)),
        None => (a.to_vec(), b.to_vec()),
    };
    Ok(score(&a, &b, metric))
}

fn score(a: &[f64], b: &[f64], metric: Metric) -> SimilarityScore {
    match metric {
        Metric::Euclidean => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            SimilarityScore {
                value: d2.sqrt(),
                degenerate: false,
            }
        }
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                SimilarityScore {
                    value: 0.0,
                    degenerate: true,
                }
            } else {
                SimilarityScore {
                    value: (dot / (na * nb)).clamp(-1.0, 1.0),
                    degenerate: false,
                }
            }
        }
        Metric::Correlation => {
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
            if va == 0.0 || vb == 0.0 {
                SimilarityScore {
                    value: 0.0,
                    degenerate: true,
                }
            } else {
                SimilarityScore {
                    value: (cov / (va * vb).sqrt()).clamp(-1.0, 1.0),
                    degenerate: false,
                }
            }
        }
    }
}

/// A target/reference explicand pair. `dummy_mask[k]` is true iff the two
/// vectors agree exactly on feature k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicandPair {
    pub target: Vec<f64>,
    pub reference: Vec<f64>,
    pub dummy_mask: Vec<bool>,
    pub similarity: Option<f64>,
    pub reference_row: usize,
    /// True when the comparable filter matched nothing and the selection fell
    /// back to plain metric similarity.
    pub fallback: bool,
}

impl ExplicandPair {
    pub fn new(
        target: Vec<f64>,
        reference: Vec<f64>,
        reference_row: usize,
        similarity: Option<f64>,
    ) -> Self {
        let dummy_mask = target
            .iter()
            .zip(&reference)
            .map(|(a, b)| a == b)
            .collect();
        Self {
            target,
            reference,
            dummy_mask,
            similarity,
            reference_row,
            fallback: false,
        }
    }

    pub fn n_dummies(&self) -> usize {
        self.dummy_mask.iter().filter(|d| **d).count()
    }

    /// Swap target and reference (dummy mask is unchanged).
    pub fn swapped(&self) -> Self {
        Self {
            target: self.reference.clone(),
            reference: self.target.clone(),
            dummy_mask: self.dummy_mask.clone(),
            similarity: self.similarity,
            reference_row: self.reference_row,
            fallback: self.fallback,
        }
    }
}

/// Reusable selection state: background rows, optional standardization stats,
/// and resolved condition indices.
pub struct PairSelector<'a> {
    background: &'a Dataset,
    strategy: PairStrategy,
    stats: Option<FeatureStats>,
    condition_indices: Vec<usize>,
}

impl<'a> PairSelector<'a> {
    pub fn new(background: &'a Dataset, strategy: PairStrategy) -> Result<Self> {
        if background.n_rows() == 0 {
            return Err(Error::EmptyBackground);
        }
        strategy.validate()?;
        let needs_stats = match &strategy {
            PairStrategy::Random { .. } => false,
            PairStrategy::Similar { standardized, .. } => *standardized,
            PairStrategy::Comparable { standardized, .. } => *standardized,
        };
        let stats = if needs_stats {
            Some(compute_stats(background)?)
        } else {
            None
        };
        let condition_indices = match &strategy {
            PairStrategy::Comparable { conditions, .. } => conditions
                .iter()
                .map(|c| background.feature_index(&c.feature))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        Ok(Self {
            background,
            strategy,
            stats,
            condition_indices,
        })
    }

    pub fn strategy(&self) -> &PairStrategy {
        &self.strategy
    }

    /// Select the reference for one target. `exclude_row` removes the target's
    /// own background row from candidacy; `seed_offset` decorrelates random
    /// draws across batch rows.
    pub fn select(
        &self,
        target: &[f64],
        exclude_row: Option<usize>,
        seed_offset: u64,
    ) -> Result<ExplicandPair> {
        if target.len() != self.background.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.background.n_features(),
                got: target.len(),
            });
        }
        let candidates: Vec<usize> = (0..self.background.n_rows())
            .filter(|&r| Some(r) != exclude_row)
            .filter(|&r| {
                !(self.strategy.exclude_duplicates() && self.background.row(r) == target)
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::EmptyBackground);
        }
        match &self.strategy {
            PairStrategy::Random { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(seed_offset));
                let row = candidates[rng.random_range(0..candidates.len())];
                Ok(ExplicandPair::new(
                    target.to_vec(),
                    self.background.row(row).to_vec(),
                    row,
                    None,
                ))
            }
            PairStrategy::Similar { metric, .. } => {
                self.closest(target, &candidates, *metric).map(|p| p)
            }
            PairStrategy::Comparable {
                conditions,
                fallback_metric,
                ..
            } => {
                let filtered: Vec<usize> = candidates
                    .iter()
                    .copied()
                    .filter(|&r| self.matches_conditions(target, r, conditions))
                    .collect();
                if filtered.is_empty() {
                    let mut pair = self.closest(target, &candidates, *fallback_metric)?;
                    pair.fallback = true;
                    Ok(pair)
                } else {
                    self.closest(target, &filtered, *fallback_metric)
                }
            }
        }
    }

    fn matches_conditions(
        &self,
        target: &[f64],
        row: usize,
        conditions: &[MatchCondition],
    ) -> bool {
        conditions
            .iter()
            .zip(&self.condition_indices)
            .all(|(c, &idx)| {
                let rv = self.background.row(row)[idx];
                let tv = target[idx];
                match c.mode {
                    MatchMode::Exact => rv == tv,
                    MatchMode::Tolerance { tolerance } => (rv - tv).abs() <= tolerance,
                }
            })
    }

    /// Argmax similarity (argmin distance) over `candidates`; ties keep the
    /// lowest row index.
    fn closest(&self, target: &[f64], candidates: &[usize], metric: Metric) -> Result<ExplicandPair> {
        let stats = self.stats.as_ref();
        let target_std = match stats {
            Some(s) => standardize_row(s, target),
            None => target.to_vec(),
        };
        let mut best_row = candidates[0];
        let mut best = f64::NEG_INFINITY;
        for &r in candidates {
            let row = self.background.row(r);
            let row_std = match stats {
                Some(s) => standardize_row(s, row),
                None => row.to_vec(),
            };
            let s = score(&target_std, &row_std, metric);
            let ranked = if metric.higher_is_closer() {
                s.value
            } else {
                -s.value
            };
            if ranked > best {
                best = ranked;
                best_row = r;
            }
        }
        let row = self.background.row(best_row);
        let row_std = match stats {
            Some(s) => standardize_row(s, row),
            None => row.to_vec(),
        };
        let final_score = score(&target_std, &row_std, metric).value;
        Ok(ExplicandPair::new(
            target.to_vec(),
            row.to_vec(),
            best_row,
            Some(final_score),
        ))
    }
}

/// Select a reference for one target explicand.
pub fn select_pair(
    target: &[f64],
    background: &Dataset,
    strategy: &PairStrategy,
    exclude_row: Option<usize>,
) -> Result<ExplicandPair> {
    PairSelector::new(background, strategy.clone())?.select(target, exclude_row, 0)
}

/// Select references for every row of `targets`, preserving order. When
/// `targets_are_background` is set, row i of the background is excluded from
/// its own candidacy.
pub fn select_pairs_batch(
    targets: &Dataset,
    background: &Dataset,
    strategy: &PairStrategy,
    targets_are_background: bool,
) -> Result<Vec<ExplicandPair>> {
    let selector = PairSelector::new(background, strategy.clone())?;
    let mut out = Vec::with_capacity(targets.n_rows());
    let mut failures = Vec::new();
    for (i, row) in targets.rows().iter().enumerate() {
        let exclude = targets_are_background.then_some(i);
        match selector.select(row, exclude, i as u64) {
            Ok(p) => out.push(p),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if let Some((first_row, first_error)) = failures.first().cloned() {
        return Err(Error::Batch {
            count: failures.len(),
            first_row,
            first_error,
            failures,
        });
    }
    Ok(out)
}
