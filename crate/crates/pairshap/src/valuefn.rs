//! Coalition value functions: pairwise single-value imputation plus the six
//! feature-removal baselines (zero, median, uniform, marginal-all,
//! marginal-kmeans, empirical-conditional).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{compute_stats, standardize_row, Dataset, FeatureKind, FeatureStats};
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::pairing::ExplicandPair;

/// Subset of features taking the target's values, as a bitmask. Supports up
/// to 64 players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(pub u64);

pub const MAX_PLAYERS: usize = 64;

impl Coalition {
    pub const fn empty() -> Self {
        Coalition(0)
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_PLAYERS);
        if n == MAX_PLAYERS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn from_members(members: &[usize]) -> Self {
        let mut bits = 0u64;
        for &m in members {
            bits |= 1 << m;
        }
        Coalition(bits)
    }

    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn with(self, k: usize) -> Self {
        Coalition(self.0 | (1 << k))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Self {
        Coalition(Self::full(n).0 ^ self.0)
    }

    pub fn members(self, n: usize) -> impl Iterator<Item = usize> {
        (0..n).filter(move |&k| self.contains(k))
    }
}

/// Weighted k-means summary of a background dataset.
#[derive(Debug, Clone)]
pub struct KmeansSummary {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster member counts; they sum to the background row count.
    pub weights: Vec<f64>,
}

/// Lloyd's algorithm on standardized features until the assignments stop
/// changing (or 100 iterations). Centroids are reported on the original
/// scale, with binary features snapped to the cluster majority value.
pub fn kmeans_summary(background: &Dataset, k: usize, seed: u64) -> Result<KmeansSummary> {
    let n_rows = background.n_rows();
    if k == 0 || k > n_rows {
        return Err(Error::KmeansTooManyClusters { k, rows: n_rows });
    }
    let stats = compute_stats(background)?;
    let points: Vec<Vec<f64>> = background
        .rows()
        .iter()
        .map(|r| standardize_row(&stats, r))
        .collect();
    let dim = background.n_features();

    // k-means++ style seeding on the standardized points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n_rows)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a center; pick any unused row.
            (0..n_rows)
                .find(|&i| !centers.contains(&points[i]))
                .unwrap_or(rng.random_range(0..n_rows))
        } else {
            let mut draw = rng.random::<f64>() * total;
            let mut pick = n_rows - 1;
            for (i, &d) in d2.iter().enumerate() {
                draw -= d;
                if draw <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let mut assignment = vec![usize::MAX; n_rows];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = sq_dist(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Recompute means; an empty cluster is re-seeded from the point
        // farthest from its current center.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (j, v) in p.iter().enumerate() {
                sums[assignment[i]][j] += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n_rows)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[assignment[a]])
                            .total_cmp(&sq_dist(&points[b], &centers[assignment[b]]))
                    })
                    .expect("non-empty dataset");
                centers[c] = points[far].clone();
            } else {
                for j in 0..dim {
                    centers[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
    }

    let mut counts = vec![0usize; k];
    for &a in &assignment {
        counts[a] += 1;
    }
    // De-standardize centroids; snap binary features to the majority value.
    let mut centroids = Vec::with_capacity(k);
    for c in 0..k {
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            let v = match stats.kinds[j] {
                FeatureKind::Binary => {
                    if counts[c] == 0 {
                        centers[c][j].round().clamp(0.0, 1.0)
                    } else {
                        let ones = points
                            .iter()
                            .zip(&assignment)
                            .filter(|(_, &a)| a == c)
                            .filter(|(p, _)| p[j] == 1.0)
                            .count();
                        if 2 * ones >= counts[c] {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
                FeatureKind::Continuous => {
                    if stats.std[j] == 0.0 {
                        stats.mean[j]
                    } else {
                        centers[c][j] * stats.std[j] + stats.mean[j]
                    }
                }
            };
            row.push(v);
        }
        centroids.push(row);
    }
    Ok(KmeansSummary {
        centroids,
        weights: counts.iter().map(|&c| c as f64).collect(),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// State for the empirical-conditional value function: rows are weighted by a
/// Gaussian kernel over the standardized distance restricted to the observed
/// coalition, truncated to the nearest `n_samples` rows.
#[derive(Debug, Clone)]
pub struct ConditionalState {
    pub rows: Vec<Vec<f64>>,
    standardized: Vec<Vec<f64>>,
    stats: FeatureStats,
    pub n_samples: usize,
    /// Per-feature kernel scale; the effective bandwidth is
    /// `sigma * sqrt(|S|)`.
    pub sigma: f64,
}

impl ConditionalState {
    pub fn new(background: &Dataset, n_samples: usize, sigma: f64) -> Result<Self> {
        if background.n_rows() == 0 {
            return Err(Error::EmptyBackground);
        }
        if n_samples == 0 {
            return Err(Error::InvalidConfig {
                detail: "conditional method needs n_samples >= 1".into(),
            });
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidConfig {
                detail: "conditional bandwidth sigma must be > 0".into(),
            });
        }
        let stats = compute_stats(background)?;
        let standardized = background
            .rows()
            .iter()
            .map(|r| standardize_row(&stats, r))
            .collect();
        Ok(Self {
            rows: background.rows().to_vec(),
            standardized,
            stats,
            n_samples: n_samples.min(background.n_rows()),
            sigma,
        })
    }

    /// Nearest rows and their normalized kernel weights for coalition `s`.
    fn neighbourhood(&self, target: &[f64], s: Coalition, n_features: usize) -> (Vec<usize>, Vec<f64>) {
        let target_std = standardize_row(&self.stats, target);
        let members: Vec<usize> = s.members(n_features).collect();
        let mut scored: Vec<(usize, f64)> = self
            .standardized
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = members
                    .iter()
                    .map(|&k| {
                        let d = target_std[k] - row[k];
                        d * d
                    })
                    .sum();
                (i, d2)
            })
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(self.n_samples);

        let two_sigma_sq = if members.is_empty() {
            1.0
        } else {
            2.0 * self.sigma * self.sigma * members.len() as f64
        };
        // Shift by the smallest distance so the largest weight is exp(0); this
        // keeps the normalization away from 0/0 when distances are large.
        let d_min = scored.first().map(|(_, d)| *d).unwrap_or(0.0);
        let raw: Vec<f64> = scored
            .iter()
            .map(|(_, d2)| (-(d2 - d_min) / two_sigma_sq).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        (scored.into_iter().map(|(i, _)| i).collect(), weights)
    }
}

/// A coalition value function: how features outside the coalition are filled
/// in before prediction.
#[derive(Debug, Clone)]
pub enum RemovalMethod {
    /// Missing features take the paired reference explicand's values.
    Pairwise(ExplicandPair),
    /// Missing features are set to zero.
    BaselineZero,
    /// Missing features are set to the training median.
    BaselineMedian(Arc<Vec<f64>>),
    /// Missing features are averaged over presampled uniform draws.
    Uniform(Arc<Vec<Vec<f64>>>),
    /// Missing features are averaged over a background sample (Monte-Carlo
    /// marginal expectation).
    MarginalAll(Arc<Vec<Vec<f64>>>),
    /// Missing features are averaged over weighted k-means centroids.
    MarginalKmeans(Arc<KmeansSummary>),
    /// Missing features are averaged over nearby background rows, weighted by
    /// similarity in the observed subspace.
    ConditionalEmpirical(Arc<ConditionalState>),
}

impl RemovalMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            RemovalMethod::Pairwise(_) => "pairwise",
            RemovalMethod::BaselineZero => "b0",
            RemovalMethod::BaselineMedian(_) => "bm",
            RemovalMethod::Uniform(_) => "uf",
            RemovalMethod::MarginalAll(_) => "ma",
            RemovalMethod::MarginalKmeans(_) => "mk",
            RemovalMethod::ConditionalEmpirical(_) => "ca",
        }
    }

    pub fn pair(&self) -> Option<&ExplicandPair> {
        match self {
            RemovalMethod::Pairwise(p) => Some(p),
            _ => None,
        }
    }
}

fn default_n_samples() -> usize {
    100
}

fn default_k() -> usize {
    10
}

fn default_sigma() -> f64 {
    0.1
}

/// Serializable method selection, e.g. `{"method":"ma","n_background":100}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Pairwise,
    B0,
    Bm,
    Uf {
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Ma {
        #[serde(default = "default_n_samples")]
        n_background: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Mk {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Ca {
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

impl MethodConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            MethodConfig::Pairwise => "pairwise",
            MethodConfig::B0 => "b0",
            MethodConfig::Bm => "bm",
            MethodConfig::Uf { .. } => "uf",
            MethodConfig::Ma { .. } => "ma",
            MethodConfig::Mk { .. } => "mk",
            MethodConfig::Ca { .. } => "ca",
        }
    }

    pub fn is_pairwise(&self) -> bool {
        matches!(self, MethodConfig::Pairwise)
    }

    /// Materialize per-batch method state. `pair` is required for the
    /// pairwise method and ignored otherwise; `default_seed` feeds any
    /// stochastic component without an explicit seed.
    pub fn build(
        &self,
        background: &Dataset,
        pair: Option<ExplicandPair>,
        default_seed: u64,
    ) -> Result<RemovalMethod> {
        match self {
            MethodConfig::Pairwise => {
                let pair = pair.ok_or_else(|| Error::InvalidConfig {
                    detail: "pairwise method needs an explicand pair".into(),
                })?;
                Ok(RemovalMethod::Pairwise(pair))
            }
            MethodConfig::B0 => Ok(RemovalMethod::BaselineZero),
            MethodConfig::Bm => {
                let stats = compute_stats(background)?;
                Ok(RemovalMethod::BaselineMedian(Arc::new(stats.median)))
            }
            MethodConfig::Uf { n_samples, seed } => {
                if *n_samples == 0 {
                    return Err(Error::InvalidConfig {
                        detail: "uniform method needs n_samples >= 1".into(),
                    });
                }
                let stats = compute_stats(background)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(default_seed));
                // One fixed sample set shared by every coalition evaluation.
                let samples: Vec<Vec<f64>> = (0..*n_samples)
                    .map(|_| {
                        (0..background.n_features())
                            .map(|j| match stats.kinds[j] {
                                FeatureKind::Continuous => {
                                    stats.min[j]
                                        + (stats.max[j] - stats.min[j]) * rng.random::<f64>()
                                }
                                // Binary bits are drawn at the observed rate
                                // so imputed rows stay on-manifold.
                                FeatureKind::Binary => {
                                    if rng.random::<f64>() < stats.mean[j] {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                            })
                            .collect()
                    })
                    .collect();
                Ok(RemovalMethod::Uniform(Arc::new(samples)))
            }
            MethodConfig::Ma { n_background, seed } => {
                if *n_background == 0 {
                    return Err(Error::InvalidConfig {
                        detail: "marginal method needs n_background >= 1".into(),
                    });
                }
                if background.n_rows() == 0 {
                    return Err(Error::EmptyBackground);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(default_seed));
                let rows: Vec<Vec<f64>> = if *n_background >= background.n_rows() {
                    background.rows().to_vec()
                } else {
                    (0..*n_background)
                        .map(|_| background.row(rng.random_range(0..background.n_rows())).to_vec())
                        .collect()
                };
                Ok(RemovalMethod::MarginalAll(Arc::new(rows)))
            }
            MethodConfig::Mk { k, seed } => {
                let summary = kmeans_summary(background, *k, seed.unwrap_or(default_seed))?;
                Ok(RemovalMethod::MarginalKmeans(Arc::new(summary)))
            }
            MethodConfig::Ca { n_samples, sigma } => {
                let state = ConditionalState::new(background, *n_samples, *sigma)?;
                Ok(RemovalMethod::ConditionalEmpirical(Arc::new(state)))
            }
        }
    }
}

/// A removal method bound to a predictor and target, with an exact tally of
/// predictor rows issued.
pub struct ValueFnEval<'a> {
    method: RemovalMethod,
    predictor: &'a dyn Predictor,
    target: Vec<f64>,
    counter: AtomicU64,
}

impl<'a> ValueFnEval<'a> {
    pub fn new(method: RemovalMethod, predictor: &'a dyn Predictor, target: Vec<f64>) -> Result<Self> {
        if target.len() != predictor.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: predictor.feature_count(),
                got: target.len(),
            });
        }
        if let RemovalMethod::Pairwise(pair) = &method {
            if pair.target != target {
                return Err(Error::InvalidConfig {
                    detail: "pairwise method pair does not match the target".into(),
                });
            }
        }
        Ok(Self {
            method,
            predictor,
            target,
            counter: AtomicU64::new(0),
        })
    }

    pub fn method(&self) -> &RemovalMethod {
        &self.method
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn n_features(&self) -> usize {
        self.target.len()
    }

    /// Total predictor rows issued so far.
    pub fn n_evaluations(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }

    /// Rows whose weighted mean prediction defines v(S), with weights summing
    /// to 1.
    pub fn hybrid_rows(&self, s: Coalition) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.n_features();
        let fill_row = |source: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    if s.contains(k) {
                        self.target[k]
                    } else {
                        source[k]
                    }
                })
                .collect()
        };
        match &self.method {
            RemovalMethod::Pairwise(pair) => (vec![fill_row(&pair.reference)], vec![1.0]),
            RemovalMethod::BaselineZero => {
                let zeros = vec![0.0; n];
                (vec![fill_row(&zeros)], vec![1.0])
            }
            RemovalMethod::BaselineMedian(medians) => (vec![fill_row(medians)], vec![1.0]),
            RemovalMethod::Uniform(samples) => {
                let w = 1.0 / samples.len() as f64;
                (
                    samples.iter().map(|row| fill_row(row)).collect(),
                    vec![w; samples.len()],
                )
            }
            RemovalMethod::MarginalAll(rows) => {
                let w = 1.0 / rows.len() as f64;
                (
                    rows.iter().map(|row| fill_row(row)).collect(),
                    vec![w; rows.len()],
                )
            }
            RemovalMethod::MarginalKmeans(summary) => {
                let total: f64 = summary.weights.iter().sum();
                (
                    summary.centroids.iter().map(|row| fill_row(row)).collect(),
                    summary.weights.iter().map(|w| w / total).collect(),
                )
            }
            RemovalMethod::ConditionalEmpirical(state) => {
                let (indices, weights) = state.neighbourhood(&self.target, s, n);
                (
                    indices
                        .into_iter()
                        .map(|i| fill_row(&state.rows[i]))
                        .collect(),
                    weights,
                )
            }
        }
    }

    /// v(S): the weighted mean prediction over the hybrid rows.
    pub fn value(&self, s: Coalition) -> Result<f64> {
        Ok(self.values(&[s])?[0])
    }

    /// Evaluate many coalitions with batched prediction.
    pub fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        // Keep single predictor calls to a bounded number of rows.
        const MAX_ROWS_PER_CALL: usize = 16384;
        let mut out = Vec::with_capacity(coalitions.len());
        let mut pending_rows: Vec<Vec<f64>> = Vec::new();
        let mut pending_weights: Vec<Vec<f64>> = Vec::new();

        let flush = |rows: &mut Vec<Vec<f64>>,
                     weights: &mut Vec<Vec<f64>>,
                     out: &mut Vec<f64>|
         -> Result<()> {
            if rows.is_empty() {
                return Ok(());
            }
            self.counter.fetch_add(rows.len() as u64, Ordering::Relaxed);
            let preds = self.predictor.predict(rows)?;
            let mut offset = 0usize;
            for w in weights.iter() {
                let chunk = &preds[offset..offset + w.len()];
                out.push(weighted_mean(chunk, w));
                offset += w.len();
            }
            rows.clear();
            weights.clear();
            Ok(())
        };

        for &s in coalitions {
            let (rows, weights) = self.hybrid_rows(s);
            if !pending_rows.is_empty() && pending_rows.len() + rows.len() > MAX_ROWS_PER_CALL {
                flush(&mut pending_rows, &mut pending_weights, &mut out)?;
            }
            pending_rows.extend(rows);
            pending_weights.push(weights);
        }
        flush(&mut pending_rows, &mut pending_weights, &mut out)?;
        Ok(out)
    }
}

/// Weighted mean that returns the common value exactly when every prediction
/// in the group is identical (so endpoint identities hold bit-for-bit).
fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let first = values[0];
    if values.iter().all(|v| *v == first) {
        return first;
    }
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}
