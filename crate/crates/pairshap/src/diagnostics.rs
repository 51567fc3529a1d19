//! Evaluation machinery for comparing attribution methods: normalized
//! attribution samples, distribution statistics, two-sample KS tests,
//! monotonicity rates, dummy-pair ratios, single-feature perturbation tests,
//! and a wall-clock benchmark harness.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::pairing::{ExplicandPair, PairStrategy};
use crate::shapley::{explain_eval, Explanation, SolverConfig};
use crate::valuefn::{MethodConfig, RemovalMethod, ValueFnEval};

/// One normalized attribution sample: the attribution difference per unit of
/// feature-value difference across an explicand pair. When the feature values
/// coincide (`degenerate`), `value` holds the raw attribution difference
/// instead of a ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedSample {
    pub feature: usize,
    pub pair: (usize, usize),
    pub value: f64,
    pub degenerate: bool,
}

/// Normalize attributions across explicand pairs: for pair (i, j) and feature
/// k, (phi_k_i - phi_k_j) / (x_k_i - x_k_j). Explanations must all come from
/// the same method; `explanations[r]` explains `explicands.row(r)`.
pub fn normalize_nonpairwise(
    explanations: &[Explanation],
    explicands: &Dataset,
    pairs: &[(usize, usize)],
) -> Result<Vec<NormalizedSample>> {
    if let Some(first) = explanations.first() {
        for e in explanations {
            if e.method != first.method {
                return Err(Error::MixedMethods {
                    a: first.method.clone(),
                    b: e.method.clone(),
                });
            }
        }
    }
    let n_features = explicands.n_features();
    let mut out = Vec::with_capacity(pairs.len() * n_features);
    for &(i, j) in pairs {
        let (ei, ej) = (&explanations[i], &explanations[j]);
        let (xi, xj) = (explicands.row(i), explicands.row(j));
        for k in 0..n_features {
            let numer = ei.phi[k] - ej.phi[k];
            let denom = xi[k] - xj[k];
            if denom == 0.0 {
                out.push(NormalizedSample {
                    feature: k,
                    pair: (i, j),
                    value: numer,
                    degenerate: true,
                });
            } else {
                out.push(NormalizedSample {
                    feature: k,
                    pair: (i, j),
                    value: numer / denom,
                    degenerate: false,
                });
            }
        }
    }
    Ok(out)
}

/// Normalize pairwise attributions directly from their explicand pairs:
/// phi_k / (x_k_target - x_k_reference). Dummy features yield degenerate
/// samples with a numerator of exactly zero. `pairs[r]` is the pair behind
/// `explanations[r]`; the sample's pair field is (r, reference_row).
pub fn normalize_pairwise(
    explanations: &[Explanation],
    pairs: &[ExplicandPair],
) -> Result<Vec<NormalizedSample>> {
    let mut out = Vec::new();
    for (r, (expl, pair)) in explanations.iter().zip(pairs).enumerate() {
        if expl.method != "pairwise" || expl.pair.is_none() {
            return Err(Error::NotPairwise {
                method: expl.method.clone(),
            });
        }
        for k in 0..expl.phi.len() {
            let denom = pair.target[k] - pair.reference[k];
            if denom == 0.0 {
                out.push(NormalizedSample {
                    feature: k,
                    pair: (r, pair.reference_row),
                    value: expl.phi[k],
                    degenerate: true,
                });
            } else {
                out.push(NormalizedSample {
                    feature: k,
                    pair: (r, pair.reference_row),
                    value: expl.phi[k] / denom,
                    degenerate: false,
                });
            }
        }
    }
    Ok(out)
}

/// Non-degenerate sample values for one feature.
pub fn feature_values(samples: &[NormalizedSample], feature: usize) -> Vec<f64> {
    samples
        .iter()
        .filter(|s| s.feature == feature && !s.degenerate)
        .map(|s| s.value)
        .collect()
}

/// Mean, sample standard deviation, and adjusted Fisher-Pearson skewness of a
/// sample; skew is absent below 3 observations or at zero spread.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistStats {
    pub mean: f64,
    pub std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
    pub count: usize,
}

pub fn dist_stats(values: &[f64]) -> Result<DistStats> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptySamples { op: "dist_stats" });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let skew = if n >= 3 && m2 > 0.0 {
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
        let g1 = m3 / m2.powf(1.5);
        Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
    } else {
        None
    };
    Ok(DistStats {
        mean,
        std,
        skew,
        count: n,
    })
}

/// Two-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
}

/// Two-sample KS test: D is the supremum ECDF gap; the p-value uses the
/// asymptotic Kolmogorov series at effective size n_a*n_b/(n_a+n_b).
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySamples { op: "ks_test" });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xs.len(), ys.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na && j < nb {
        let t = xs[i].min(ys[j]);
        while i < na && xs[i] == t {
            i += 1;
        }
        while j < nb && ys[j] == t {
            j += 1;
        }
        let gap = (i as f64 / na as f64 - j as f64 / nb as f64).abs();
        if gap > d {
            d = gap;
        }
    }
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    Ok(KsResult {
        d,
        p_value: kolmogorov_p(d, n_eff),
    })
}

/// Asymptotic Kolmogorov tail probability, 2 * sum (-1)^(j-1) exp(-2 j^2 L^2)
/// with L = D * sqrt(n_eff); 100 terms keep the truncation error below 1e-12
/// wherever the series has decayed.
fn kolmogorov_p(d: f64, n_eff: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let lambda = d * n_eff.sqrt();
    let mut sum = 0.0;
    for j in 1..=100u32 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        if j % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedSign {
    Positive,
    Negative,
}

/// Monotonicity audit for one feature: the fraction of samples whose
/// normalized attribution sign matches the declared direction, counting
/// degenerate samples with zero numerator as matches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMonotonicity {
    pub expected: ExpectedSign,
    pub matched_fraction: f64,
    pub n_pairs: usize,
    pub n_dummy: usize,
}

pub type MonotonicityReport = BTreeMap<usize, FeatureMonotonicity>;

pub fn monotonicity(
    samples: &[NormalizedSample],
    expected_signs: &BTreeMap<usize, ExpectedSign>,
) -> MonotonicityReport {
    let mut report = BTreeMap::new();
    for (&feature, &expected) in expected_signs {
        let subset: Vec<&NormalizedSample> =
            samples.iter().filter(|s| s.feature == feature).collect();
        if subset.is_empty() {
            continue;
        }
        let matched = subset.iter().filter(|s| sign_matches(s, expected)).count();
        report.insert(
            feature,
            FeatureMonotonicity {
                expected,
                matched_fraction: matched as f64 / subset.len() as f64,
                n_pairs: subset.len(),
                n_dummy: subset.iter().filter(|s| s.degenerate).count(),
            },
        );
    }
    report
}

fn sign_matches(s: &NormalizedSample, expected: ExpectedSign) -> bool {
    if s.degenerate {
        s.value == 0.0
    } else {
        match expected {
            ExpectedSign::Positive => s.value > 0.0,
            ExpectedSign::Negative => s.value < 0.0,
        }
    }
}

/// Per-feature dummy-pair ratio: among samples where the feature value is
/// identical across the pair, the fraction whose attribution (difference) is
/// exactly zero. Features with no dummy pairs are absent from the map.
pub fn dummy_ratio(samples: &[NormalizedSample]) -> BTreeMap<usize, f64> {
    let mut zero: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total: BTreeMap<usize, usize> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.degenerate) {
        *total.entry(s.feature).or_default() += 1;
        if s.value == 0.0 {
            *zero.entry(s.feature).or_default() += 1;
        }
    }
    total
        .into_iter()
        .map(|(k, t)| (k, *zero.get(&k).unwrap_or(&0) as f64 / t as f64))
        .collect()
}

/// One perturbation sample: how the prediction and the feature's attribution
/// move when a single feature is shifted by `delta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub row: usize,
    pub delta: f64,
    pub prediction_delta: f64,
    pub attribution_delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub records: Vec<PerturbationRecord>,
    /// Perturbations dropped for leaving the configured validity range.
    pub skipped: usize,
}

/// Single-feature perturbation test. For the pairwise method the perturbed
/// row is explained against the original as its reference, so the whole
/// prediction shift lands on the perturbed feature; for other methods the
/// original and perturbed rows are explained separately (same seeds and
/// background) and the attribution delta is the difference of the feature's
/// attributions.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_test(
    rows: &Dataset,
    feature: usize,
    deltas: &[f64],
    method: &MethodConfig,
    background: &Dataset,
    predictor: &dyn Predictor,
    solver: &SolverConfig,
    validity: Option<(f64, f64)>,
    seed: u64,
) -> Result<PerturbationOutcome> {
    if rows.kinds()[feature] != FeatureKind::Continuous {
        return Err(Error::InvalidConfig {
            detail: format!(
                "perturbation feature {:?} must be continuous",
                rows.names()[feature]
            ),
        });
    }
    let in_range = |v: f64| match validity {
        Some((lo, hi)) => v >= lo && v <= hi,
        None => true,
    };
    let originals: Vec<f64> = predictor.predict(rows.rows())?;

    let shared_method = if method.is_pairwise() {
        None
    } else {
        Some(method.build(background, None, seed)?)
    };

    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (r, row) in rows.rows().iter().enumerate() {
        let base_expl = match &shared_method {
            Some(m) => {
                let eval = ValueFnEval::new(m.clone(), predictor, row.clone())?;
                Some(explain_eval(&eval, &solver.for_row(r))?)
            }
            None => None,
        };
        for &delta in deltas {
            let mut perturbed = row.clone();
            perturbed[feature] += delta;
            if !in_range(perturbed[feature]) {
                skipped += 1;
                continue;
            }
            let f_perturbed = predictor.predict(std::slice::from_ref(&perturbed))?[0];
            let prediction_delta = f_perturbed - originals[r];
            let attribution_delta = match &shared_method {
                None => {
                    // Pairwise: the perturbed row is the target, the original
                    // row its reference; only `feature` can differ.
                    let pair = ExplicandPair::new(perturbed.clone(), row.clone(), r, None);
                    let eval = ValueFnEval::new(
                        RemovalMethod::Pairwise(pair),
                        predictor,
                        perturbed.clone(),
                    )?;
                    explain_eval(&eval, &solver.for_row(r))?.phi[feature]
                }
                Some(m) => {
                    let eval = ValueFnEval::new(m.clone(), predictor, perturbed.clone())?;
                    let expl = explain_eval(&eval, &solver.for_row(r))?;
                    expl.phi[feature] - base_expl.as_ref().expect("explained above").phi[feature]
                }
            };
            records.push(PerturbationRecord {
                row: r,
                delta,
                prediction_delta,
                attribution_delta,
            });
        }
    }
    Ok(PerturbationOutcome { records, skipped })
}

/// Wall-clock summary for one method at a fixed solver budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub method: String,
    pub mean: Duration,
    pub std_dev: Duration,
    pub n_evaluations: u64,
    pub repeats: usize,
}

/// Time each method explaining one explicand, `repeats` times. Each timed run
/// covers the method's imputation setup (sampling, clustering) plus the
/// solve; pair selection happens once outside the loop. `exclude_row` is the
/// explicand's own background row, if it has one.
#[allow(clippy::too_many_arguments)]
pub fn benchmark(
    methods: &[MethodConfig],
    target: &[f64],
    exclude_row: Option<usize>,
    background: &Dataset,
    predictor: &dyn Predictor,
    strategy: &PairStrategy,
    solver: &SolverConfig,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchResult>> {
    if repeats < 2 {
        return Err(Error::InvalidConfig {
            detail: "benchmark needs repeats >= 2".into(),
        });
    }
    let mut out = Vec::with_capacity(methods.len());
    for method in methods {
        let pair = if method.is_pairwise() {
            Some(crate::pairing::select_pair(
                target,
                background,
                strategy,
                exclude_row,
            )?)
        } else {
            None
        };
        let run = || -> Result<(Duration, u64)> {
            let start = Instant::now();
            let built = method.build(background, pair.clone(), seed)?;
            let eval = ValueFnEval::new(built, predictor, target.to_vec())?;
            explain_eval(&eval, solver)?;
            Ok((start.elapsed(), eval.n_evaluations()))
        };
        run()?; // warm-up, untimed
        let mut times = Vec::with_capacity(repeats);
        let mut n_evaluations = 0;
        for _ in 0..repeats {
            let (t, n) = run()?;
            times.push(t.as_secs_f64());
            n_evaluations = n;
        }
        let mean = times.iter().sum::<f64>() / repeats as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (repeats as f64 - 1.0);
        out.push(BenchResult {
            method: method.tag().to_string(),
            mean: Duration::from_secs_f64(mean),
            std_dev: Duration::from_secs_f64(var.sqrt()),
            n_evaluations,
            repeats,
        });
    }
    Ok(out)
}

/// Monotonicity and rank-agreement scores within one similarity bucket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinCell {
    pub match_fraction: f64,
    /// Spearman rank correlation between the feature-value difference and the
    /// attribution across the bin's pairs; absent under 2 usable samples or
    /// at zero rank variance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityBin {
    pub lo: f64,
    pub hi: f64,
    pub n_pairs: usize,
    pub cells: BTreeMap<usize, BinCell>,
}

/// Bucket pairwise samples by the pair's similarity score and report
/// per-feature monotonicity (and Spearman rank agreement) per bucket. Bins
/// ascend by score; empty bins are omitted.
pub fn similarity_vs_monotonicity(
    pairs: &[ExplicandPair],
    samples: &[NormalizedSample],
    expected_signs: &BTreeMap<usize, ExpectedSign>,
    n_bins: usize,
) -> Result<Vec<SimilarityBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig {
            detail: "need at least one similarity bin".into(),
        });
    }
    let scores: Vec<f64> = pairs
        .iter()
        .map(|p| {
            p.similarity.ok_or_else(|| Error::InvalidConfig {
                detail: "pairs lack similarity scores (random strategy?)".into(),
            })
        })
        .collect::<Result<_>>()?;
    if scores.is_empty() {
        return Err(Error::EmptySamples {
            op: "similarity_vs_monotonicity",
        });
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let bin_of = |score: f64| -> usize { (((score - lo) / width) as usize).min(n_bins - 1) };

    let mut bins = Vec::new();
    for b in 0..n_bins {
        let members: Vec<usize> = (0..pairs.len())
            .filter(|&i| bin_of(scores[i]) == b)
            .collect();
        if members.is_empty() {
            continue;
        }
        let in_bin: Vec<&NormalizedSample> = samples
            .iter()
            .filter(|s| members.contains(&s.pair.0))
            .collect();
        let mut cells = BTreeMap::new();
        for (&feature, &expected) in expected_signs {
            let subset: Vec<&&NormalizedSample> =
                in_bin.iter().filter(|s| s.feature == feature).collect();
            if subset.is_empty() {
                continue;
            }
            let matched = subset.iter().filter(|s| sign_matches(s, expected)).count();
            // Rank agreement between feature deltas and attributions.
            let mut dx = Vec::new();
            let mut phi = Vec::new();
            for s in subset.iter().filter(|s| !s.degenerate) {
                let pair = &pairs[s.pair.0];
                let delta = pair.target[feature] - pair.reference[feature];
                dx.push(delta);
                phi.push(s.value * delta);
            }
            cells.insert(
                feature,
                BinCell {
                    match_fraction: matched as f64 / subset.len() as f64,
                    spearman: spearman(&dx, &phi),
                    n: subset.len(),
                },
            );
        }
        bins.push(SimilarityBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            n_pairs: members.len(),
            cells,
        });
    }
    Ok(bins)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}
