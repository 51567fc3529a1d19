//! Weighted-least-squares Shapley estimation over coalition indicator
//! vectors. Below the budget the coalition set is enumerated exhaustively
//! (which reproduces exact attributions); above it, coalitions are sampled in
//! complement pairs, stratified by size with probability proportional to the
//! kernel mass of each size.

use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::wls::{cholesky_solve, pseudo_inverse_solve};
use super::{Explanation, GameValues};
use crate::error::{Error, Result};
use crate::valuefn::Coalition;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0_f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Per-coalition kernel weight: (n-1) / (C(n,s) * s * (n-s)).
fn kernel_weight(n: usize, s: usize) -> f64 {
    (n as f64 - 1.0) / (binomial(n, s) * s as f64 * (n - s) as f64)
}

/// Total kernel mass of one coalition size: C(n,s) * weight = (n-1)/(s(n-s)).
fn size_mass(n: usize, s: usize) -> f64 {
    (n as f64 - 1.0) / (s as f64 * (n - s) as f64)
}

/// All bitmasks over n players with exactly s bits set, ascending.
fn masks_of_size(n: usize, s: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if s == 0 || s > n {
        return out;
    }
    let limit = 1u64 << n;
    let mut mask = (1u64 << s) - 1;
    while mask < limit {
        out.push(mask);
        // Gosper's hack: next mask with the same popcount.
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    out
}

/// Estimate attributions by solving the kernel-weighted least squares
/// problem; the efficiency constraint is enforced exactly by eliminating the
/// last player.
pub fn kernelshap(game: &dyn GameValues, budget: usize, seed: u64) -> Result<Explanation> {
    let n = game.n_players();
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

    let endpoints = game.values(&[Coalition::empty(), Coalition::full(n)])?;
    let (v0, vfull) = (endpoints[0], endpoints[1]);
    let delta = vfull - v0;

    let mut warnings = Vec::new();
    let phi = if n == 1 {
        vec![delta]
    } else {
        let interior = if n < 63 { (1u64 << n) - 2 } else { u64::MAX };
        let (masks, weights) = if interior <= budget as u64 {
            enumerate_all(n)
        } else {
            if budget < 2 * n {
                return Err(Error::InvalidConfig {
                    detail: format!("coalition budget {budget} below 2n = {}", 2 * n),
                });
            }
            sample_coalitions(n, budget, seed)
        };
        let values = game.values(&masks)?;
        solve_wls(n, &masks, &weights, &values, v0, delta, &mut warnings)
    };

    Ok(Explanation {
        phi0: v0,
        phi,
        prediction: vfull,
        method: String::new(),
        pair: None,
        n_evaluations: game.evaluations() - evals_before,
        wall_time: start.elapsed(),
        warnings,
    })
}

fn enumerate_all(n: usize) -> (Vec<Coalition>, Vec<f64>) {
    let full = (1u64 << n) - 1;
    let mut masks = Vec::with_capacity((full - 1) as usize);
    let mut weights = Vec::with_capacity((full - 1) as usize);
    for bits in 1..full {
        masks.push(Coalition(bits));
        weights.push(kernel_weight(n, bits.count_ones() as usize));
    }
    (masks, weights)
}

/// Draw coalitions in complement pairs. Sizes that fit the remaining budget
/// are enumerated fully with exact kernel weights (most-weighted sizes
/// first); the rest of the budget is spread over the remaining sizes in
/// proportion to their kernel mass, leftovers going to the largest masses.
fn sample_coalitions(n: usize, budget: usize, seed: u64) -> (Vec<Coalition>, Vec<f64>) {
    let mut masks: Vec<Coalition> = Vec::with_capacity(budget);
    let mut weights: Vec<f64> = Vec::with_capacity(budget);
    let full = Coalition::full(n).0;
    let mut remaining = budget;

    // Group sizes s and n-s together; smaller s means larger mass.
    let mut to_sample: Vec<(usize, f64)> = Vec::new();
    for s in 1..=n / 2 {
        let paired = s != n - s;
        let count = binomial(n, s) * if paired { 2.0 } else { 1.0 };
        let mass = size_mass(n, s) * if paired { 2.0 } else { 1.0 };
        if !to_sample.is_empty() || count > remaining as f64 {
            to_sample.push((s, mass));
            continue;
        }
        for mask in masks_of_size(n, s) {
            masks.push(Coalition(mask));
            weights.push(kernel_weight(n, s));
            if paired {
                masks.push(Coalition(full ^ mask));
                weights.push(kernel_weight(n, n - s));
            }
        }
        remaining -= count as usize;
    }
    if to_sample.is_empty() || remaining < 2 {
        return (masks, weights);
    }

    // Allocate paired draws proportionally to group mass.
    let draws_total = remaining / 2;
    let total_mass: f64 = to_sample.iter().map(|(_, m)| m).sum();
    let mut alloc: Vec<usize> = to_sample
        .iter()
        .map(|(_, m)| ((draws_total as f64) * m / total_mass).floor() as usize)
        .collect();
    // Cap by the number of distinct draws each size supports.
    let capacity = |s: usize| -> usize {
        let c = binomial(n, s);
        let cap = if s * 2 == n { c / 2.0 } else { c };
        cap.min(usize::MAX as f64 / 2.0) as usize
    };
    for (i, (s, _)) in to_sample.iter().enumerate() {
        alloc[i] = alloc[i].min(capacity(*s));
    }
    let mut leftover = draws_total.saturating_sub(alloc.iter().sum());
    while leftover > 0 {
        let mut placed = false;
        for (i, (s, _)) in to_sample.iter().enumerate() {
            if leftover == 0 {
                break;
            }
            if alloc[i] < capacity(*s) {
                alloc[i] += 1;
                leftover -= 1;
                placed = true;
            }
        }
        if !placed {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: HashSet<u64> = HashSet::new();
    for ((s, _), k) in to_sample.iter().zip(&alloc) {
        let mut drawn = 0usize;
        let mut attempts = 0usize;
        let max_attempts = 50 * k + 100;
        let mut group: Vec<u64> = Vec::with_capacity(*k);
        while drawn < *k && attempts < max_attempts {
            attempts += 1;
            let picks = rand::seq::index::sample(&mut rng, n, *s);
            let mut mask = 0u64;
            for p in picks {
                mask |= 1 << p;
            }
            if used.contains(&mask) || used.contains(&(full ^ mask)) {
                continue;
            }
            used.insert(mask);
            used.insert(full ^ mask);
            group.push(mask);
            drawn += 1;
        }
        if group.is_empty() {
            continue;
        }
        // The group's total kernel mass is spread evenly over its draws.
        let per_side = size_mass(n, *s) / group.len() as f64;
        let w = if *s * 2 == n { per_side / 2.0 } else { per_side };
        for mask in group {
            masks.push(Coalition(mask));
            weights.push(w);
            masks.push(Coalition(full ^ mask));
            weights.push(w);
        }
    }
    (masks, weights)
}

/// Weighted least squares on coalition indicators with the last player
/// eliminated through the efficiency constraint.
fn solve_wls(
    n: usize,
    masks: &[Coalition],
    weights: &[f64],
    values: &[f64],
    v0: f64,
    delta: f64,
    warnings: &mut Vec<String>,
) -> Vec<f64> {
    let dim = n - 1;
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    for ((mask, &w), &v) in masks.iter().zip(weights).zip(values) {
        let zn = mask.contains(dim);
        let y = v - v0 - if zn { delta } else { 0.0 };
        for i in 0..dim {
            x[i] = (mask.contains(i) as i64 - zn as i64) as f64;
        }
        for i in 0..dim {
            if x[i] == 0.0 {
                continue;
            }
            let wxi = w * x[i];
            b[i] += wxi * y;
            for j in 0..=i {
                a[i * dim + j] += wxi * x[j];
            }
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            a[i * dim + j] = a[j * dim + i];
        }
    }

    let head = match cholesky_solve(&a, &b, dim) {
        Some(sol) => sol,
        None => {
            let clashes = indistinguishable_pairs(n, masks);
            let detail = if clashes.is_empty() {
                "singular coalition system".to_string()
            } else {
                format!(
                    "singular coalition system; indistinguishable feature pairs: {clashes:?}"
                )
            };
            log::warn!("{detail}; falling back to a minimum-norm solve");
            warnings.push(detail);
            pseudo_inverse_solve(&a, &b, dim)
        }
    };
    let mut phi = head;
    let last = delta - phi.iter().sum::<f64>();
    phi.push(last);
    phi
}

/// Feature index pairs whose membership columns agree on every sampled
/// coalition; such features cannot be told apart by the solver.
fn indistinguishable_pairs(n: usize, masks: &[Coalition]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if masks.iter().all(|m| m.contains(i) == m.contains(j)) {
                out.push((i, j));
            }
        }
    }
    out
}
