use exrank_core::consensus::check_partition;
use exrank_core::rank::{fitness, sorted_order};
use exrank_core::{
    group_exhaustive, group_ransac, pass_at_k_ranked, pass_at_k_unbiased, rank, rank_by_scores,
    rank_with_trace, ConsensusSet, CorrectnessVector, ExecutionMatrix, GaConfig, RankedSelection,
    ScoreParams,
};
use proptest::prelude::*;

fn arb_rows(max_n: usize, max_m: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1..=max_n, 0..=max_m)
        .prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(any::<bool>(), m), n))
}

fn pass_set(row: &[bool]) -> Vec<usize> {
    (0..row.len()).filter(|&t| row[t]).collect()
}

/// Fraction of all k-subsets of n samples (the first c correct) containing at
/// least one correct sample.
fn brute_force_pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        if mask & ((1u32 << c) - 1) != 0 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

proptest! {
    #[test]
    fn exhaustive_grouping_is_a_sound_partition(rows in arb_rows(12, 8)) {
        let m = ExecutionMatrix::from_bools("p", &rows).unwrap();
        let sets = group_exhaustive(&m);
        prop_assert_eq!(check_partition(&sets).unwrap(), rows.len());
        for set in &sets {
            for &s in &set.solutions {
                prop_assert_eq!(&pass_set(&rows[s]), &set.tests);
            }
        }
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                prop_assert_ne!(&a.tests, &b.tests);
            }
        }
    }

    #[test]
    fn grouping_is_equivariant_under_row_permutation(
        (rows, perm) in arb_rows(10, 6).prop_flat_map(|rows| {
            let n = rows.len();
            (Just(rows), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        // Row i of the permuted matrix is original row perm[i].
        let permuted: Vec<Vec<bool>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let original = group_exhaustive(&ExecutionMatrix::from_bools("p", &rows).unwrap());
        let shuffled = group_exhaustive(&ExecutionMatrix::from_bools("p", &permuted).unwrap());
        let mut mapped: Vec<ConsensusSet> = shuffled
            .into_iter()
            .map(|s| {
                let mut ids: Vec<usize> = s.solutions.iter().map(|&i| perm[i]).collect();
                ids.sort_unstable();
                ConsensusSet::new(ids, s.tests)
            })
            .collect();
        exrank_core::consensus::sort_sets(&mut mapped);
        prop_assert_eq!(mapped, original);
    }

    #[test]
    fn ransac_with_ample_iterations_matches_exhaustive(rows in arb_rows(8, 6), seed in any::<u64>()) {
        let m = ExecutionMatrix::from_bools("p", &rows).unwrap();
        let iterations = 10 * m.solutions() * m.tests().max(1);
        prop_assert_eq!(group_ransac(&m, iterations, seed), group_exhaustive(&m));
    }

    #[test]
    fn rank_is_deterministic_and_a_permutation(rows in arb_rows(15, 6), seed in any::<u64>()) {
        let sets = group_exhaustive(&ExecutionMatrix::from_bools("p", &rows).unwrap());
        let cfg = GaConfig { seed, generations: 20, ..GaConfig::default() };
        let a = rank_with_trace("p", &sets, &ScoreParams::default(), &cfg).unwrap();
        let b = rank_with_trace("p", &sets, &ScoreParams::default(), &cfg).unwrap();
        prop_assert_eq!(&a.selection, &b.selection);
        prop_assert_eq!(&a.best_fitness_trace, &b.best_fitness_trace);

        let mut sorted = a.selection.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..rows.len()).collect::<Vec<_>>());
        prop_assert_eq!(&a.selection.order, &sorted_order(&a.selection.solution_scores));
        prop_assert!(a.best_fitness_trace.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(a.raw_best_fitness <= a.optimal_fitness + 1e-9);
        prop_assert!(
            (fitness(&a.selection.order, &a.selection.solution_scores, cfg.gamma) - a.optimal_fitness).abs()
                < 1e-9
        );
    }

    #[test]
    fn positive_rescaling_keeps_the_order(
        scores in prop::collection::vec(0.0f64..50.0, 1..30),
        factor in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        let cfg = GaConfig { seed, generations: 15, ..GaConfig::default() };
        let scaled: Vec<f64> = scores.iter().map(|s| s * factor).collect();
        let a = rank_by_scores("p", scores, &cfg).unwrap();
        let b = rank_by_scores("p", scaled, &cfg).unwrap();
        prop_assert_eq!(a.selection.order, b.selection.order);
        prop_assert_eq!(a.selection.best, b.selection.best);
    }

    #[test]
    fn best_is_in_an_argmax_set(rows in arb_rows(12, 6)) {
        let params = ScoreParams::default();
        let sets = group_exhaustive(&ExecutionMatrix::from_bools("p", &rows).unwrap());
        let sel = rank("p", &sets, &params, &GaConfig { generations: 10, ..GaConfig::default() }).unwrap();
        let top = sets
            .iter()
            .map(|s| exrank_core::score_set(s, &params).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let best = sel.best.unwrap();
        prop_assert_eq!(sel.solution_scores[best], top);
    }

    #[test]
    fn ranked_pass_at_k_is_monotone_in_k(
        (order, correct) in (1usize..20).prop_flat_map(|n| (
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(0..n, 0..n),
        ))
    ) {
        let n = order.len();
        let sel = RankedSelection {
            task_id: "p".into(),
            best: order.first().copied(),
            solution_scores: vec![1.0; n],
            order,
        };
        let c = CorrectnessVector::new("p", correct);
        let values: Vec<f64> = (1..=n + 2).map(|k| pass_at_k_ranked(&sel, &c, k)).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(values.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn estimator_is_monotone((n, c, k) in (1usize..60).prop_flat_map(|n| (Just(n), 0..=n, 1..=n))) {
        let v = pass_at_k_unbiased(n, c, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        if k < n {
            prop_assert!(pass_at_k_unbiased(n, c, k + 1).unwrap() >= v - 1e-15);
        }
        if c < n {
            prop_assert!(pass_at_k_unbiased(n, c + 1, k).unwrap() >= v - 1e-15);
        }
    }
}

#[test]
fn estimator_matches_subset_enumeration() {
    for n in 1..=8 {
        for c in 0..=n {
            for k in 1..=n {
                let got = pass_at_k_unbiased(n, c, k).unwrap();
                let want = brute_force_pass_at_k(n, c, k);
                assert!(
                    (got - want).abs() <= 1e-12,
                    "n={n} c={c} k={k}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn estimator_spot_values() {
    assert!((pass_at_k_unbiased(5, 2, 1).unwrap() - 0.4).abs() < 1e-12);
    assert!((pass_at_k_unbiased(5, 2, 2).unwrap() - 0.7).abs() < 1e-12);
    assert!(pass_at_k_unbiased(3, 1, 4).is_err());
}
