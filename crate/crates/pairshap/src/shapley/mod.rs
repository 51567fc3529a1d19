//! Attribution solvers: exact enumeration over all coalitions, a
//! weighted-least-squares estimator over full or sampled coalition sets, and
//! dummy-feature pruning for pairwise games.

mod kernel;
mod wls;

pub use kernel::kernelshap;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::pairing::{ExplicandPair, PairSelector, PairStrategy};
use crate::valuefn::{Coalition, MethodConfig, RemovalMethod, ValueFnEval, MAX_PLAYERS};

/// A cooperative game presented to the solvers: a player count and a value
/// for every coalition.
pub trait GameValues: Sync {
    fn n_players(&self) -> usize;
    fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>>;
    /// Monotone tally of underlying work (predictor rows for model games).
    fn evaluations(&self) -> u64;
}

impl GameValues for ValueFnEval<'_> {
    fn n_players(&self) -> usize {
        self.n_features()
    }

    fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        ValueFnEval::values(self, coalitions)
    }

    fn evaluations(&self) -> u64 {
        self.n_evaluations()
    }
}

/// View of a game with a subset of players; the remaining players are frozen
/// as members of every coalition.
struct ReducedGame<'a> {
    inner: &'a dyn GameValues,
    /// Reduced player index -> full player index.
    keep: Vec<usize>,
    /// Bits always present (the pruned players).
    base: Coalition,
}

impl GameValues for ReducedGame<'_> {
    fn n_players(&self) -> usize {
        self.keep.len()
    }

    fn values(&self, coalitions: &[Coalition]) -> Result<Vec<f64>> {
        let mapped: Vec<Coalition> = coalitions
            .iter()
            .map(|s| {
                let mut full = self.base;
                for (r, &f) in self.keep.iter().enumerate() {
                    if s.contains(r) {
                        full = full.with(f);
                    }
                }
                full
            })
            .collect();
        self.inner.values(&mapped)
    }

    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
}

/// Solution mode: `Auto` enumerates exactly up to `exact_threshold` players
/// and samples `n_coalitions` above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Auto,
    Exact,
    Sampled,
}

fn default_true() -> bool {
    true
}

fn default_exact_threshold() -> usize {
    14
}

fn default_budget() -> usize {
    2048
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    #[serde(default)]
    pub mode: SolverMode,
    /// Drop dummy features from pairwise games before solving.
    #[serde(default = "default_true")]
    pub prune_dummies: bool,
    /// Largest player count enumerated exhaustively.
    #[serde(default = "default_exact_threshold")]
    pub exact_threshold: usize,
    /// Coalition budget for sampled solves.
    #[serde(default = "default_budget")]
    pub n_coalitions: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::Auto,
            prune_dummies: true,
            exact_threshold: default_exact_threshold(),
            n_coalitions: default_budget(),
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn exact() -> Self {
        Self {
            mode: SolverMode::Exact,
            ..Self::default()
        }
    }

    pub fn sampled(n_coalitions: usize, seed: u64) -> Self {
        Self {
            mode: SolverMode::Sampled,
            n_coalitions,
            seed: Some(seed),
            ..Self::default()
        }
    }

    fn resolved_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Copy with the sampling seed offset by a row index, so batch rows draw
    /// independent coalition sets.
    pub fn for_row(&self, row: usize) -> Self {
        let mut cfg = self.clone();
        cfg.seed = Some(self.resolved_seed().wrapping_add(row as u64));
        cfg
    }
}

/// Pair provenance carried by pairwise explanations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairInfo {
    pub reference_row: usize,
    pub dummy_mask: Vec<bool>,
    pub similarity: Option<f64>,
    pub fallback: bool,
}

/// Additive attribution of one prediction: `phi0 + sum(phi) = prediction`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Explanation {
    pub phi0: f64,
    pub phi: Vec<f64>,
    pub prediction: f64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairInfo>,
    pub n_evaluations: u64,
    pub wall_time: Duration,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl Explanation {
    /// |phi0 + sum(phi) - prediction| relative to the prediction scale.
    pub fn efficiency_gap(&self) -> f64 {
        let total = self.phi0 + self.phi.iter().sum::<f64>();
        (total - self.prediction).abs() / self.prediction.abs().max(1.0)
    }
}

/// Exact attribution by direct summation over all 2^n coalitions.
///
/// Coalition values are combined complement-pair by complement-pair, which
/// makes swapping target and reference in a pairwise game negate every
/// attribution bit-for-bit.
pub fn exact_shapley(game: &dyn GameValues, max_players: usize) -> Result<Explanation> {
    let n = game.n_players();
    if n > max_players {
        return Err(Error::TooManyFeatures { n, max: max_players });
    }
    if n >= 26 {
        // 2^26 coalition values would not fit a sane evaluation budget.
        return Err(Error::TooManyFeatures { n, max: 25 });
    }
    let start = Instant::now();
    let evals_before = game.evaluations();

    if n == 0 {
        let v0 = game.values(&[Coalition::empty()])?[0];
        return Ok(Explanation {
            phi0: v0,
            phi: Vec::new(),
            prediction: v0,
            method: String::new(),
            pair: None,
            n_evaluations: game.evaluations() - evals_before,
            wall_time: start.elapsed(),
            warnings: Vec::new(),
        });
    }

    let total = 1u64 << n;
    let masks: Vec<Coalition> = (0..total).map(Coalition).collect();
    let v = game.values(&masks)?;

    // w[s] = s! (n-1-s)! / n!
    let mut fact = vec![1.0_f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let w: Vec<f64> = (0..n).map(|s| fact[s] * fact[n - 1 - s] / fact[n]).collect();

    let full = Coalition::full(n);
    let half = 1u64 << (n - 1);
    let coef = |i: usize, m: Coalition| -> f64 {
        if m.contains(i) {
            w[m.len() - 1]
        } else {
            -w[m.len()]
        }
    };
    let phi: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for low in 0..half {
                let m = Coalition(low);
                let c = Coalition(full.0 ^ low);
                let pair_term = coef(i, m) * v[m.0 as usize] + coef(i, c) * v[c.0 as usize];
                acc += pair_term;
            }
            acc
        })
        .collect();

    Ok(Explanation {
        phi0: v[0],
        phi,
        prediction: v[full.0 as usize],
        method: String::new(),
        pair: None,
        n_evaluations: game.evaluations() - evals_before,
        wall_time: start.elapsed(),
        warnings: Vec::new(),
    })
}

/// Dispatch a game to the configured solver.
pub fn solve(game: &dyn GameValues, cfg: &SolverConfig) -> Result<Explanation> {
    let n = game.n_players();
    if n > MAX_PLAYERS {
        return Err(Error::TooManyFeatures {
            n,
            max: MAX_PLAYERS,
        });
    }
    match cfg.mode {
        SolverMode::Exact => exact_shapley(game, cfg.exact_threshold),
        SolverMode::Sampled => kernelshap(game, cfg.n_coalitions, cfg.resolved_seed()),
        SolverMode::Auto => {
            if n <= cfg.exact_threshold {
                exact_shapley(game, cfg.exact_threshold)
            } else {
                kernelshap(game, cfg.n_coalitions, cfg.resolved_seed())
            }
        }
    }
}

/// Solve a pairwise game after removing its dummy features. Dummy
/// attributions are exactly zero; the reduced game has one player per
/// differing feature.
pub fn prune_and_solve(eval: &ValueFnEval, cfg: &SolverConfig) -> Result<Explanation> {
    let pair = eval.method().pair().ok_or_else(|| Error::NotPairwise {
        method: eval.method().tag().into(),
    })?;
    let keep: Vec<usize> = pair
        .dummy_mask
        .iter()
        .enumerate()
        .filter(|(_, dummy)| !**dummy)
        .map(|(k, _)| k)
        .collect();
    let base = Coalition::from_members(
        &pair
            .dummy_mask
            .iter()
            .enumerate()
            .filter(|(_, dummy)| **dummy)
            .map(|(k, _)| k)
            .collect::<Vec<_>>(),
    );
    let reduced = ReducedGame {
        inner: eval,
        keep: keep.clone(),
        base,
    };
    let inner = solve(&reduced, cfg)?;
    let mut phi = vec![0.0; eval.n_features()];
    for (r, &f) in keep.iter().enumerate() {
        phi[f] = inner.phi[r];
    }
    Ok(Explanation { phi, ..inner })
}

/// Explain one bound value function, pruning pairwise games when configured.
pub fn explain_eval(eval: &ValueFnEval, cfg: &SolverConfig) -> Result<Explanation> {
    let is_pairwise = matches!(eval.method(), RemovalMethod::Pairwise(_));
    let mut expl = if is_pairwise && cfg.prune_dummies {
        prune_and_solve(eval, cfg)?
    } else {
        solve(eval, cfg)?
    };
    expl.method = eval.method().tag().to_string();
    if let RemovalMethod::Pairwise(pair) = eval.method() {
        expl.pair = Some(PairInfo {
            reference_row: pair.reference_row,
            dummy_mask: pair.dummy_mask.clone(),
            similarity: pair.similarity,
            fallback: pair.fallback,
        });
    }
    Ok(expl)
}

/// Explain an explicit target/reference pair.
pub fn explain_pair(
    pair: ExplicandPair,
    predictor: &dyn Predictor,
    cfg: &SolverConfig,
) -> Result<Explanation> {
    let target = pair.target.clone();
    let eval = ValueFnEval::new(RemovalMethod::Pairwise(pair), predictor, target)?;
    explain_eval(&eval, cfg)
}

/// Inputs for a batch explanation run.
pub struct ExplainRequest<'a> {
    pub targets: &'a Dataset,
    pub background: &'a Dataset,
    pub predictor: &'a dyn Predictor,
    pub method: &'a MethodConfig,
    /// Pair selection strategy; only consulted for the pairwise method.
    pub strategy: &'a PairStrategy,
    pub solver: &'a SolverConfig,
    /// When targets are rows of the background, exclude each row from its own
    /// pair candidacy.
    pub targets_are_background: bool,
    /// Seed for stochastic method state without an explicit seed.
    pub seed: u64,
}

/// Explain every target row. Order-preserving and deterministic under fixed
/// seeds regardless of worker scheduling.
pub fn explain_batch(req: &ExplainRequest) -> Result<Vec<Explanation>> {
    check_features(req.targets, req.predictor)?;
    if req.background.names() != req.targets.names() {
        return Err(Error::FeatureMismatch {
            detail: "targets and background declare different features".into(),
        });
    }

    let shared_method = if req.method.is_pairwise() {
        None
    } else {
        Some(req.method.build(req.background, None, req.seed)?)
    };
    let selector = if req.method.is_pairwise() {
        Some(PairSelector::new(req.background, req.strategy.clone())?)
    } else {
        None
    };

    let results: Vec<std::result::Result<Explanation, (usize, String)>> = req
        .targets
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let run = || -> Result<Explanation> {
                let method = match (&shared_method, &selector) {
                    (Some(m), _) => m.clone(),
                    (None, Some(sel)) => {
                        let exclude = req.targets_are_background.then_some(i);
                        RemovalMethod::Pairwise(sel.select(row, exclude, i as u64)?)
                    }
                    _ => unreachable!("method state prepared above"),
                };
                let eval = ValueFnEval::new(method, req.predictor, row.clone())?;
                explain_eval(&eval, &req.solver.for_row(i))
            };
            run().map_err(|e| (i, e.to_string()))
        })
        .collect();

    let mut out = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => out.push(e),
            Err(f) => failures.push(f),
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

fn check_features(targets: &Dataset, predictor: &dyn Predictor) -> Result<()> {
    if targets.n_features() != predictor.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: predictor.feature_count(),
            got: targets.n_features(),
        });
    }
    if let Some(names) = predictor.feature_names() {
        if names != targets.names() {
            return Err(Error::FeatureMismatch {
                detail: format!(
                    "model expects {:?}, dataset provides {:?}",
                    names,
                    targets.names()
                ),
            });
        }
    }
    Ok(())
}

/// One row of a waterfall export: top features by |phi|, the rest aggregated.
#[derive(Debug, Clone, Serialize)]
pub struct WaterfallRow {
    pub feature: String,
    /// Feature value (relative value for pairwise explanations); absent for
    /// the aggregated tail.
    pub value: Option<f64>,
    pub phi: f64,
}

/// Sort features by |phi| descending, keep `top_k`, and fold the tail into an
/// "Other Features" row.
pub fn waterfall(
    expl: &Explanation,
    names: &[String],
    values: &[f64],
    top_k: usize,
) -> Vec<WaterfallRow> {
    let mut order: Vec<usize> = (0..expl.phi.len()).collect();
    order.sort_by(|&a, &b| {
        expl.phi[b]
            .abs()
            .total_cmp(&expl.phi[a].abs())
            .then(a.cmp(&b))
    });
    let mut rows: Vec<WaterfallRow> = order
        .iter()
        .take(top_k)
        .map(|&i| WaterfallRow {
            feature: names[i].clone(),
            value: Some(values[i]),
            phi: expl.phi[i],
        })
        .collect();
    if order.len() > top_k {
        let rest: f64 = order[top_k..].iter().map(|&i| expl.phi[i]).sum();
        rows.push(WaterfallRow {
            feature: "Other Features".into(),
            value: None,
            phi: rest,
        });
    }
    rows
}
