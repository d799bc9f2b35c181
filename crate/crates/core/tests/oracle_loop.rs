mod common;

use common::oracles::{eod_reference, logistic_loss, numeric_gradient};
use instascope_core::fixtures::separable_pool;
use instascope_core::oracle::{
    equal_opportunity_difference, full_data_model, gradient, simulate_active_learning, sigmoid, split_pool,
    train_classifier, ActiveLearningConfig, QueryStrategy, TrainingParams,
};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<bool> = (0..20).map(|_| rng.random_bool(0.5)).collect();
        let params: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let analytic = gradient(&params, &refs, &labels, 0.01);
        let numeric = numeric_gradient(|p| logistic_loss(p, &rows, &labels, 0.01), &params, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!((a - n).abs() <= 1e-6 * n.abs().max(1.0), "{a} vs {n}");
        }
    }
}

#[test]
fn midpoint_is_queried_first() {
    let rows = [vec![-2.0, -2.0], vec![-1.8, -2.1], vec![2.0, 2.0], vec![2.1, 1.9], vec![0.0, 0.05], vec![-2.2, -1.9]];
    let labels = [false, false, true, true];
    let refs: Vec<&[f64]> = rows[..4].iter().map(Vec::as_slice).collect();
    let model = train_classifier(&refs, &labels, TrainingParams::default()).unwrap();
    let pool: Vec<&[f64]> = rows[4..].iter().map(Vec::as_slice).collect();
    let probs: Vec<f64> = pool
        .iter()
        .map(|x| sigmoid(model.weights[0] * x[0] + model.weights[1] * x[1] + model.bias_term))
        .collect();
    assert!((probs[0] - 0.5).abs() < (probs[1] - 0.5).abs());
    assert_eq!(instascope_core::oracle::uncertainty_query(&model, &pool).unwrap(), 0);
}

#[test]
fn exhausting_the_pool_matches_full_data_training() {
    let (x, y) = separable_pool(2, 60);
    for strategy in [QueryStrategy::Uncertainty, QueryStrategy::Random] {
        let cfg = ActiveLearningConfig::new(1000, strategy);
        let session = simulate_active_learning(&x, &y, &cfg).unwrap();
        let (full, acc) = full_data_model(&x, &y, &cfg).unwrap();
        assert_eq!(session.model, full);
        assert_eq!(session.curve.last().unwrap().heldout_accuracy, acc);
    }
}

#[test]
fn uncertainty_reaches_most_of_full_accuracy_with_few_labels() {
    let (x, y) = separable_pool(0, 200);
    let cfg = ActiveLearningConfig::new(20, QueryStrategy::Uncertainty);
    let session = simulate_active_learning(&x, &y, &cfg).unwrap();
    let (_, full) = full_data_model(&x, &y, &cfg).unwrap();
    let (_, training) = split_pool(200, &cfg);
    assert!(session.labeled_ids.len() * 2 <= training.len());
    assert!(session.curve.last().unwrap().heldout_accuracy >= 0.9 * full);
}

fn pool_strategy() -> impl Strategy<Value = (u64, usize, usize, bool)> {
    (0u64..1000, 20usize..80, 1usize..100, any::<bool>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn session_invariants((seed, n, budget, uncertain) in pool_strategy()) {
        let (x, y) = separable_pool(seed, n);
        let strategy = if uncertain { QueryStrategy::Uncertainty } else { QueryStrategy::Random };
        let mut cfg = ActiveLearningConfig::new(budget, strategy);
        cfg.seed = seed;
        let (heldout, training) = split_pool(n, &cfg);
        let positives = training.iter().filter(|&&i| y[i]).count();
        prop_assume!(positives >= 5 && training.len() - positives >= 5);
        let s = simulate_active_learning(&x, &y, &cfg).unwrap();
        prop_assert!(s.query_log.len() <= budget);
        prop_assert_eq!(s.labeled_ids.len(), (budget + cfg.seed_size).min(training.len()));
        let mut all: Vec<usize> = s.labeled_ids.iter().chain(&s.unlabeled_ids).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, training);
        prop_assert_eq!(s.heldout_ids, heldout);
        prop_assert!(s.curve.windows(2).all(|w| w[1].queries_used > w[0].queries_used));
        prop_assert!(s.model.loss_history.windows(2).all(|w| w[1] < w[0]));
        let again = simulate_active_learning(&x, &y, &cfg).unwrap();
        prop_assert_eq!(again.query_log, s.query_log);
    }

    #[test]
    fn eod_is_antisymmetric_and_matches_counts(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 4..60)
    ) {
        let pred: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let mut truth: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let mut group: Vec<bool> = rows.iter().map(|r| r.2).collect();
        // guarantee a positive in each group
        truth[0] = true; group[0] = true;
        truth[1] = true; group[1] = false;
        let names: Vec<&str> = group.iter().map(|&g| if g { "a" } else { "b" }).collect();
        let swapped: Vec<&str> = group.iter().map(|&g| if g { "b" } else { "a" }).collect();
        let eod = equal_opportunity_difference(&pred, &truth, &names).unwrap();
        let back = equal_opportunity_difference(&pred, &truth, &swapped).unwrap();
        prop_assert_eq!(eod, -back);
        prop_assert!((-1.0..=1.0).contains(&eod));
        prop_assert!((eod - eod_reference(&pred, &truth, &group)).abs() < 1e-15);
    }
}

#[test]
fn hand_counted_eod() {
    // group a: 3 of 4 positives caught; group b: 3 of 5
    let truth = [true, true, true, true, true, true, true, true, true, false];
    let pred = [true, true, true, false, true, true, true, false, false, true];
    let groups = ["a", "a", "a", "a", "b", "b", "b", "b", "b", "b"];
    let eod = equal_opportunity_difference(&pred, &truth, &groups).unwrap();
    assert!((eod - 0.15).abs() < 1e-15);
    let same = equal_opportunity_difference(&[true, false, true, false], &[true, true, true, true], &["a", "a", "b", "b"]).unwrap();
    assert_eq!(same, 0.0);
}
