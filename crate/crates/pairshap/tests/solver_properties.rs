//! Cross-module solver invariants: WLS-vs-enumeration agreement for every
//! removal method, the Shapley axioms on model-backed games, and pruning
//! soundness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pairshap::{
    exact_shapley, explain_pair, kernelshap, prune_and_solve, Coalition, Dataset, ExplicandPair,
    GameValues, LinearModel, Link, MethodConfig, Predictor, RemovalMethod, SolverConfig, Tree,
    TreeEnsemble, TreeNode, ValueFnEval,
};

fn random_dataset(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> Dataset {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
        .collect();
    Dataset::infer((0..n).map(|i| format!("x{i}")).collect(), data, None).unwrap()
}

fn random_linear(rng: &mut ChaCha8Rng, n: usize) -> LinearModel {
    let weights = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
    LinearModel::new(weights, rng.random::<f64>(), Link::Identity)
}

fn random_tree_ensemble(rng: &mut ChaCha8Rng, n: usize) -> TreeEnsemble {
    let n_trees = 2 + rng.random_range(0..3);
    let trees = (0..n_trees)
        .map(|_| {
            // Depth-2 trees: 3 internal nodes, 4 leaves, in topological order.
            let f = |rng: &mut ChaCha8Rng| rng.random_range(0..n);
            let t = |rng: &mut ChaCha8Rng| rng.random::<f64>() * 2.0 - 1.0;
            let v = |rng: &mut ChaCha8Rng| rng.random::<f64>() * 10.0 - 5.0;
            Tree {
                nodes: vec![
                    TreeNode::split(f(rng), t(rng), 1, 2),
                    TreeNode::split(f(rng), t(rng), 3, 4),
                    TreeNode::split(f(rng), t(rng), 5, 6),
                    TreeNode::leaf(v(rng)),
                    TreeNode::leaf(v(rng)),
                    TreeNode::leaf(v(rng)),
                    TreeNode::leaf(v(rng)),
                ],
            }
        })
        .collect();
    TreeEnsemble::new(trees, 0.0, Link::Identity, n).unwrap()
}

fn all_method_configs() -> Vec<MethodConfig> {
    vec![
        MethodConfig::Pairwise,
        MethodConfig::B0,
        MethodConfig::Bm,
        MethodConfig::Uf {
            n_samples: 12,
            seed: Some(5),
        },
        MethodConfig::Ma {
            n_background: 12,
            seed: Some(5),
        },
        MethodConfig::Mk {
            k: 4,
            seed: Some(5),
        },
        MethodConfig::Ca {
            n_samples: 12,
            sigma: 0.25,
        },
    ]
}

#[test]
fn kernelshap_full_enumeration_matches_exact_for_every_method() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for round in 0..4 {
        let n = 3 + (round % 6);
        let background = random_dataset(&mut rng, 30, n);
        let linear = random_linear(&mut rng, n);
        let trees = random_tree_ensemble(&mut rng, n);
        let models: [&dyn Predictor; 2] = [&linear, &trees];
        for model in models {
            let target: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let pair = ExplicandPair::new(target.clone(), background.row(0).to_vec(), 0, None);
            for cfg in all_method_configs() {
                let method = cfg.build(&background, Some(pair.clone()), 7).unwrap();
                let eval_a = ValueFnEval::new(method.clone(), model, target.clone()).unwrap();
                let exact = exact_shapley(&eval_a, 14).unwrap();
                let eval_b = ValueFnEval::new(method, model, target.clone()).unwrap();
                let ks = kernelshap(&eval_b, 1 << 16, 0).unwrap();
                for (a, b) in exact.phi.iter().zip(&ks.phi) {
                    assert!(
                        (a - b).abs() < 1e-8,
                        "method {} n={n}: {a} vs {b}",
                        cfg.tag()
                    );
                }
                assert!(exact.efficiency_gap() < 1e-6);
                assert!(ks.efficiency_gap() < 1e-6);
            }
        }
    }
}

#[test]
fn symmetric_features_get_equal_attributions() {
    // f depends on x0 and x1 only through their sum, and the pair gives both
    // features identical value swings, so the game is symmetric in players 0
    // and 1.
    struct SymGame;
    impl GameValues for SymGame {
        fn n_players(&self) -> usize {
            3
        }
        fn values(&self, coalitions: &[Coalition]) -> pairshap::Result<Vec<f64>> {
            Ok(coalitions
                .iter()
                .map(|s| {
                    let x0 = if s.contains(0) { 2.0 } else { 0.5 };
                    let x1 = if s.contains(1) { 2.0 } else { 0.5 };
                    let x2 = if s.contains(2) { 1.0 } else { -1.0 };
                    (x0 + x1) * (x0 + x1) + 3.0 * x2
                })
                .collect())
        }
        fn evaluations(&self) -> u64 {
            0
        }
    }
    let expl = exact_shapley(&SymGame, 14).unwrap();
    assert!((expl.phi[0] - expl.phi[1]).abs() <= 1e-8);
}

#[test]
fn players_that_never_change_the_value_get_zero() {
    struct DummyPlayerGame;
    impl GameValues for DummyPlayerGame {
        fn n_players(&self) -> usize {
            4
        }
        fn values(&self, coalitions: &[Coalition]) -> pairshap::Result<Vec<f64>> {
            // Player 2 is ignored entirely.
            Ok(coalitions
                .iter()
                .map(|s| {
                    [0, 1, 3]
                        .iter()
                        .filter(|&&k| s.contains(k))
                        .map(|&k| (k + 1) as f64)
                        .sum()
                })
                .collect())
        }
        fn evaluations(&self) -> u64 {
            0
        }
    }
    let expl = exact_shapley(&DummyPlayerGame, 14).unwrap();
    assert!(expl.phi[2].abs() <= 1e-9);
}

#[test]
fn additive_inverse_holds_bitwise_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..25 {
        let n = 2 + rng.random_range(0..6);
        let model = random_linear(&mut rng, n);
        let trees = random_tree_ensemble(&mut rng, n);
        let target: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut reference: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        // Force a couple of dummies now and then.
        if n > 2 && rng.random::<f64>() < 0.5 {
            reference[0] = target[0];
        }
        let models: [&dyn Predictor; 2] = [&model, &trees];
        for m in models {
            let fwd = ExplicandPair::new(target.clone(), reference.clone(), 0, None);
            let bwd = fwd.swapped();
            let cfg = SolverConfig::exact();
            let ef = explain_pair(fwd, m, &cfg).unwrap();
            let eb = explain_pair(bwd, m, &cfg).unwrap();
            for (a, b) in ef.phi.iter().zip(&eb.phi) {
                // Exact equality; `==` rather than bit comparison so that a
                // structural +0.0 matches a negated -0.0 on dummy features.
                assert_eq!(*a, -b, "{a} vs -({b})");
            }
        }
    }
}

#[test]
fn additive_inverse_in_sampled_mode_with_mirrored_coalitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 12usize;
    let model = random_tree_ensemble(&mut rng, n);
    let target: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let reference: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let fwd = ExplicandPair::new(target.clone(), reference.clone(), 0, None);
    let bwd = fwd.swapped();
    // Same seed -> same coalition set; the sampler always adds complements,
    // so the swapped game sees the mirrored sample.
    let mut cfg = SolverConfig::sampled(128, 3);
    cfg.prune_dummies = false;
    let ef = explain_pair(fwd, &model, &cfg).unwrap();
    let eb = explain_pair(bwd, &model, &cfg).unwrap();
    for (a, b) in ef.phi.iter().zip(&eb.phi) {
        assert!((a + b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn pruning_matches_unpruned_exact_solve_on_wide_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 16usize;
    let model = random_linear(&mut rng, n);
    let mut reference: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let target: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    // 12 dummies, 4 live features.
    for k in 0..n {
        if ![2, 5, 9, 14].contains(&k) {
            reference[k] = target[k];
        }
    }
    let pair = ExplicandPair::new(target.clone(), reference.clone(), 0, None);
    let eval = ValueFnEval::new(RemovalMethod::Pairwise(pair.clone()), &model, target.clone())
        .unwrap();
    let mut cfg = SolverConfig::exact();
    cfg.exact_threshold = 16;
    let pruned = prune_and_solve(&eval, &cfg).unwrap();
    assert!(pruned.n_evaluations <= 16);

    let eval_full =
        ValueFnEval::new(RemovalMethod::Pairwise(pair), &model, target).unwrap();
    let unpruned = exact_shapley(&eval_full, 16).unwrap();
    assert_eq!(unpruned.n_evaluations, 65536);
    for (a, b) in pruned.phi.iter().zip(&unpruned.phi) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn sampled_solves_are_deterministic_per_seed_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 11usize;
    let model = random_tree_ensemble(&mut rng, n);
    let target: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let reference: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let pair = ExplicandPair::new(target.clone(), reference, 0, None);
    let cfg = SolverConfig::sampled(64, 11);
    let a = explain_pair(pair.clone(), &model, &cfg).unwrap();
    let b = explain_pair(pair, &model, &cfg).unwrap();
    assert_eq!(a.phi, b.phi);
}
