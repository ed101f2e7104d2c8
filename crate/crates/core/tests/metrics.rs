mod oracle;

use morale_core::metrics::{acceptability_prob, auc_safety, ece, kendall_tau, mrr, ndcg_at_k, unsafe_rate};
use proptest::prelude::*;

/// Gold ratings are means of one to three 1-5 ratings.
fn gold() -> impl Strategy<Value = f64> {
    prop::collection::vec(1u8..=5, 1..=3).prop_map(|r| r.iter().map(|&x| x as f64).sum::<f64>() / r.len() as f64)
}

/// Scores on a coarse grid so ties and exact thresholds come up often.
fn pred() -> impl Strategy<Value = f64> {
    prop_oneof![(0i32..=60).prop_map(|i| i as f64 / 10.0), 0.0f64..6.0]
}

fn list(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|n| (prop::collection::vec(pred(), n), prop::collection::vec(gold(), n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn ndcg_matches_oracle((p, g) in list(5), k in 1usize..7) {
        let got = ndcg_at_k(&p, &g, k).unwrap();
        prop_assert!((got - oracle::ndcg(&p, &g, k)).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
    }

    #[test]
    fn mrr_matches_oracle(lists in prop::collection::vec(list(5), 1..8)) {
        let refs: Vec<(&[f64], &[f64])> = lists.iter().map(|(p, g)| (p.as_slice(), g.as_slice())).collect();
        let want = lists.iter().map(|(p, g)| oracle::reciprocal_rank(p, g)).sum::<f64>() / lists.len() as f64;
        prop_assert!((mrr(&refs).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn safety_metrics_match_oracle((p, g) in list(40)) {
        let u = unsafe_rate(&p, &g, 2.5).unwrap();
        prop_assert_eq!(u.value, oracle::unsafe_rate(&p, &g));
        prop_assert_eq!(u.empty_denominator, g.iter().all(|&x| x > 2.5));
        let a = auc_safety(&p, &g).unwrap();
        prop_assert!((a.auc - oracle::auc_safety(&p, &g)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.auc));
        prop_assert_eq!(a.sweep.points.len(), 41);
    }

    #[test]
    fn tau_matches_oracle((p, g) in (2usize..=8).prop_flat_map(|n| (prop::collection::vec(pred(), n), prop::collection::vec(gold(), n)))) {
        let got = kendall_tau(&p, &g).unwrap();
        prop_assert!((got - oracle::kendall_tau_b(&p, &g)).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&got));
    }

    #[test]
    fn ece_matches_oracle((p, g) in list(60)) {
        let probs: Vec<f64> = p.iter().map(|&s| acceptability_prob(s)).collect();
        let outcomes: Vec<bool> = g.iter().map(|&x| x > 2.5).collect();
        let (got, bins) = ece(&probs, &outcomes, 10).unwrap();
        prop_assert!((got - oracle::ece(&probs, &outcomes, 10)).abs() < 1e-12);
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), probs.len());
    }

    /// Ranking metrics see only the order of predictions.
    #[test]
    fn ranking_metrics_ignore_monotone_rescaling((p, g) in list(5), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let q: Vec<f64> = p.iter().map(|x| (a * x + b).exp()).collect();
        prop_assert_eq!(ndcg_at_k(&p, &g, 5).unwrap(), ndcg_at_k(&q, &g, 5).unwrap());
        prop_assert_eq!(mrr(&[(&p, &g)]).unwrap(), mrr(&[(&q, &g)]).unwrap());
        if p.len() >= 2 {
            prop_assert_eq!(kendall_tau(&p, &g).unwrap(), kendall_tau(&q, &g).unwrap());
        }
    }
}

#[test]
fn hand_cases() {
    let v = ndcg_at_k(&[2.0, 3.0, 1.0], &[5.0, 3.0, 4.0], 5).unwrap();
    assert!((v - 0.774_699).abs() < 1e-6, "{v}");
    assert!((mrr(&[(&[3.0, 1.0], &[5.0, 1.0]), (&[1.0, 2.0, 3.0, 4.0], &[5.0, 1.0, 1.0, 1.0])]).unwrap() - 0.625).abs() < 1e-15);
    assert_eq!(unsafe_rate(&[3.1, 2.2, 4.4], &[1.5, 2.0, 4.0], 2.5).unwrap().value, 0.5);
    assert!((kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    let (e, _) = ece(&[0.95, 0.95], &[true, false], 10).unwrap();
    assert!((e - 0.45).abs() < 1e-12);
    assert_eq!(auc_safety(&[1.0, 1.0, 5.0, 5.0], &[1.0, 2.0, 4.0, 5.0]).unwrap().auc, 1.0);
    let flat = auc_safety(&[3.0, 3.0], &[1.0, 5.0]).unwrap().auc;
    assert!((flat - 0.5).abs() <= 0.05);
}

#[test]
fn random_predictions_have_chance_auc() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let gold: Vec<f64> = (0..10_000).map(|_| rng.random_range(1..=5) as f64).collect();
    let pred: Vec<f64> = (0..10_000).map(|_| rng.random_range(1.0..5.0)).collect();
    let auc = auc_safety(&pred, &gold).unwrap().auc;
    assert!((auc - 0.5).abs() < 0.05, "{auc}");
}
