//! Property tests for pair selection: mask correctness, brute-force
//! optimality of the metric search, condition soundness, and the locality
//! advantage of similarity selection over random selection.

use proptest::prelude::*;

use pairshap::{
    generate_synthetic, select_pair, select_pairs_batch, similarity, Dataset, MatchCondition,
    MatchMode, Metric, PairStrategy, SyntheticFeature, SyntheticSpec,
};

fn dataset_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    let cell = prop_oneof![
        (-4i32..=4).prop_map(|v| v as f64 * 0.5), // coarse grid forces ties/dummies
        any::<f64>().prop_map(|v| (v % 10.0).abs()),
    ];
    let n = 3usize;
    (
        proptest::collection::vec(proptest::collection::vec(cell.clone(), n), 2..12),
        proptest::collection::vec(cell, n),
    )
}

proptest! {
    #[test]
    fn dummy_mask_matches_exact_equality((rows, target) in dataset_strategy()) {
        let bg = Dataset::infer(
            (0..3).map(|i| format!("x{i}")).collect(),
            rows,
            None,
        ).unwrap();
        let pair = select_pair(
            &target,
            &bg,
            &PairStrategy::Similar { metric: Metric::Euclidean, standardized: false, exclude_duplicates: false },
            None,
        ).unwrap();
        for k in 0..3 {
            prop_assert_eq!(pair.dummy_mask[k], pair.target[k] == pair.reference[k]);
        }
        // The reference equals the background row it points at.
        prop_assert_eq!(&pair.reference, bg.row(pair.reference_row));
    }

    #[test]
    fn similar_selection_is_brute_force_optimal((rows, target) in dataset_strategy()) {
        let bg = Dataset::infer(
            (0..3).map(|i| format!("x{i}")).collect(),
            rows,
            None,
        ).unwrap();
        for metric in [Metric::Euclidean, Metric::Cosine, Metric::Correlation] {
            let pair = select_pair(
                &target,
                &bg,
                &PairStrategy::Similar { metric, standardized: false, exclude_duplicates: false },
                None,
            ).unwrap();
            let chosen = similarity(&target, &pair.reference, metric, None).unwrap().value;
            for r in 0..bg.n_rows() {
                let s = similarity(&target, bg.row(r), metric, None).unwrap().value;
                if metric.higher_is_closer() {
                    prop_assert!(s <= chosen + 1e-12, "row {r} beats chosen: {s} > {chosen}");
                    if s == chosen {
                        prop_assert!(pair.reference_row <= r);
                    }
                } else {
                    prop_assert!(s >= chosen - 1e-12, "row {r} beats chosen: {s} < {chosen}");
                    if s == chosen {
                        prop_assert!(pair.reference_row <= r);
                    }
                }
            }
        }
    }

    #[test]
    fn comparable_results_satisfy_all_conditions((rows, target) in dataset_strategy()) {
        let bg = Dataset::infer(
            (0..3).map(|i| format!("x{i}")).collect(),
            rows,
            None,
        ).unwrap();
        let strategy = PairStrategy::Comparable {
            conditions: vec![
                MatchCondition { feature: "x0".into(), mode: MatchMode::Tolerance { tolerance: 1.0 } },
                MatchCondition { feature: "x1".into(), mode: MatchMode::Tolerance { tolerance: 2.0 } },
            ],
            fallback_metric: Metric::Euclidean,
            standardized: false,
            exclude_duplicates: false,
        };
        let pair = select_pair(&target, &bg, &strategy, None).unwrap();
        if !pair.fallback {
            prop_assert!((pair.reference[0] - target[0]).abs() <= 1.0);
            prop_assert!((pair.reference[1] - target[1]).abs() <= 2.0);
        }
    }
}

#[test]
fn similar_strategy_selects_closer_references_than_random() {
    let spec = SyntheticSpec {
        features: vec![
            SyntheticFeature::Continuous {
                name: "x0".into(),
                low: 0.0,
                high: 10.0,
            },
            SyntheticFeature::Continuous {
                name: "x1".into(),
                low: -5.0,
                high: 5.0,
            },
            SyntheticFeature::Binary {
                name: "x2".into(),
                p: 0.5,
            },
        ],
        target: None,
    };
    let bg = generate_synthetic(300, 3, &spec, 42).unwrap();
    let similar = select_pairs_batch(
        &bg,
        &bg,
        &PairStrategy::Similar {
            metric: Metric::Euclidean,
            standardized: true,
            exclude_duplicates: false,
        },
        true,
    )
    .unwrap();
    let random = select_pairs_batch(&bg, &bg, &PairStrategy::random(9), true).unwrap();
    let mean_dist = |pairs: &[pairshap::ExplicandPair]| -> f64 {
        pairs
            .iter()
            .map(|p| {
                similarity(&p.target, &p.reference, Metric::Euclidean, None)
                    .unwrap()
                    .value
            })
            .sum::<f64>()
            / pairs.len() as f64
    };
    assert!(mean_dist(&similar) <= mean_dist(&random));
}

#[test]
fn random_batch_is_reproducible_and_self_excluding() {
    let spec = SyntheticSpec::uniform(3);
    let bg = generate_synthetic(50, 3, &spec, 1).unwrap();
    let a = select_pairs_batch(&bg, &bg, &PairStrategy::random(5), true).unwrap();
    let b = select_pairs_batch(&bg, &bg, &PairStrategy::random(5), true).unwrap();
    assert_eq!(a.len(), 50);
    for (i, (pa, pb)) in a.iter().zip(&b).enumerate() {
        assert_eq!(pa.reference_row, pb.reference_row);
        assert_ne!(pa.reference_row, i);
    }
    // Rows are drawn independently, so references vary across rows.
    let distinct: std::collections::HashSet<usize> =
        a.iter().map(|p| p.reference_row).collect();
    assert!(distinct.len() > 10);
}
