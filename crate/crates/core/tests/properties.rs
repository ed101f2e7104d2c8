mod oracle;

use std::collections::BTreeSet;

use morale_core::agreement::{
    krippendorff_alpha, screen_items, shift_direction, Level, RatingsMatrix, ShiftConfig,
};
use morale_core::data::{
    group_by_image, parse_corpus_str, split_corpus, to_jsonl, truncate_lists, AggregationRule, Modality,
    ModalityLabel, Rating, ScenarioRecord,
};
use morale_core::model::{bpo_loss, listmle_loss, listmle_loss_for_permutation};
use proptest::prelude::*;

fn modality() -> impl Strategy<Value = Modality> {
    prop_oneof![Just(Modality::Text), Just(Modality::Image), Just(Modality::Both)]
}

fn record() -> impl Strategy<Value = ScenarioRecord> {
    (
        "[a-z0-9]{1,6}",
        0u8..12,
        "[ -~]{0,30}",
        prop::collection::vec((0u8..4, 1u8..=5), 0..4),
        prop::collection::vec((0u8..4, modality()), 0..3),
        prop::option::of(prop_oneof![Just(1i8), Just(-1i8)]),
        prop::option::of(1u8..=5),
        prop::option::of(-3.0f64..3.0),
    )
        .prop_map(|(id, img, text, ratings, labels, norm, canary, q)| {
            let mut r = ScenarioRecord::new(id, format!("img{img}"), format!("file://{img}.png"), text);
            r.ratings = ratings
                .into_iter()
                .map(|(a, score)| Rating { annotator_id: format!("a{a}"), score })
                .collect();
            r.modality_labels = labels
                .into_iter()
                .take(r.ratings.len())
                .map(|(a, modality)| ModalityLabel { annotator_id: format!("a{a}"), modality })
                .collect();
            r.norm_label = norm;
            r.is_canary = canary.is_some();
            r.canary_gold = canary;
            r.latent_q = q;
            r
        })
}

/// Rated records with unique ids, at most `per_image` per image.
fn rated_corpus(per_image: usize) -> impl Strategy<Value = Vec<ScenarioRecord>> {
    prop::collection::vec((1usize..=per_image, prop::collection::vec(1u8..=5, 1..4)), 1..30).prop_map(|imgs| {
        let mut out = Vec::new();
        for (i, (n, ratings)) in imgs.into_iter().enumerate() {
            for j in 0..n {
                out.push(
                    ScenarioRecord::new(format!("s{i}-{j}"), format!("img{i}"), "ref", format!("t{i} {j}"))
                        .with_ratings(&ratings),
                );
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn corpus_round_trips(records in prop::collection::vec(record(), 0..10)) {
        let text = to_jsonl(&records);
        let back = parse_corpus_str(&text).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(to_jsonl(&back), text);
    }

    #[test]
    fn split_is_disjoint_by_image(records in rated_corpus(5), ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let groups = group_by_image(&records, AggregationRule::Mean).unwrap();
        let s = split_corpus(&groups, ratio, seed).unwrap();
        let train: BTreeSet<&str> = s.train.iter().map(|g| g.image_id.as_str()).collect();
        let test: BTreeSet<&str> = s.test.iter().map(|g| g.image_id.as_str()).collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), groups.len());
        let want = ratio * groups.len() as f64;
        prop_assert!((s.train.len() as f64 - want).abs() <= 1.0);
    }

    #[test]
    fn truncation_nests(records in rated_corpus(9), seed in any::<u64>()) {
        let groups = morale_core::data::group_by_image_unbounded(&records, AggregationRule::Mean).unwrap();
        let mut prev: Option<Vec<BTreeSet<String>>> = None;
        for m in (1..=5).rev() {
            let cut = truncate_lists(&groups, m, seed);
            let ids: Vec<BTreeSet<String>> =
                cut.iter().map(|g| g.items.iter().map(|i| i.scenario_id.clone()).collect()).collect();
            for (g, set) in groups.iter().zip(&ids) {
                prop_assert_eq!(set.len(), g.len().min(m));
            }
            if let Some(p) = &prev {
                for (small, big) in ids.iter().zip(p) {
                    prop_assert!(small.is_subset(big));
                }
            }
            prev = Some(ids);
        }
    }

    #[test]
    fn plackett_luce_sums_to_one(s in (2usize..=5).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))) {
        let total: f64 = oracle::permutations(s.len())
            .iter()
            .map(|p| (-listmle_loss_for_permutation(&s, p).unwrap().value).exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
    }

    #[test]
    fn listmle_matches_oracle(s in (1usize..=5).prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(1.0f64..5.0, n)))) {
        let (scores, gold) = s;
        let mut perm: Vec<usize> = (0..gold.len()).collect();
        perm.sort_by(|&a, &b| gold[b].partial_cmp(&gold[a]).unwrap().then(a.cmp(&b)));
        let want = oracle::plackett_luce_nll(&scores, &perm);
        prop_assert!((listmle_loss(&scores, &gold).unwrap().value - want).abs() < 1e-9);
    }

    #[test]
    fn ranking_losses_ignore_shared_offsets(s in (2usize..=5).prop_flat_map(|n| (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(1.0f64..5.0, n))), c in -20.0f64..20.0) {
        let (scores, gold) = s;
        let shifted: Vec<f64> = scores.iter().map(|x| x + c).collect();
        for f in [listmle_loss, bpo_loss] {
            let (a, b) = (f(&scores, &gold).unwrap(), f(&shifted, &gold).unwrap());
            prop_assert!((a.value - b.value).abs() < 1e-9);
            prop_assert!(a.grad.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_matches_oracle(rows in prop::collection::vec(prop::collection::vec(prop::option::of(1u8..=5), 3), 2..12)) {
        let units: Vec<Vec<u8>> = rows.iter().map(|r| r.iter().flatten().copied().collect()).collect();
        let pairable: usize = units.iter().filter(|u| u.len() >= 2).map(|u| u.len()).sum();
        for (level, ordinal) in [(Level::Ordinal, true), (Level::Nominal, false)] {
            let m = RatingsMatrix::from_rows(level, &rows).unwrap();
            match krippendorff_alpha(&m) {
                Ok(a) => {
                    prop_assert!((a - oracle::alpha(&units, ordinal)).abs() < 1e-9);
                }
                Err(_) => prop_assert!(pairable < 2),
            }
        }
    }

    /// Nominal alpha does not care which code names which category.
    #[test]
    fn nominal_alpha_ignores_relabeling(rows in prop::collection::vec(prop::collection::vec(prop::option::of(0u8..3), 3), 2..12), perm in Just(vec![0u8, 1, 2]).prop_shuffle()) {
        let relabeled: Vec<Vec<Option<u8>>> =
            rows.iter().map(|r| r.iter().map(|v| v.map(|x| perm[x as usize])).collect()).collect();
        let a = krippendorff_alpha(&RatingsMatrix::from_rows(Level::Nominal, &rows).unwrap());
        let b = krippendorff_alpha(&RatingsMatrix::from_rows(Level::Nominal, &relabeled).unwrap());
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn screening_is_idempotent(records in rated_corpus(3), max in 0.0f64..3.0) {
        let once = screen_items(&records, max);
        let twice = screen_items(&once.kept, max);
        prop_assert!(twice.removed.is_empty());
        prop_assert_eq!(twice.kept, once.kept.clone());
        prop_assert_eq!(once.kept.len() + once.removed.len(), records.len());
    }

    /// Mirroring the rating scale and the norm label mirrors the shift.
    #[test]
    fn shift_is_antisymmetric(consensus in 1.0f64..=5.0, label in prop_oneof![Just(1i8), Just(-1i8)]) {
        let c = ShiftConfig::default();
        let a = shift_direction(label, consensus, &c).unwrap();
        let b = shift_direction(-label, 6.0 - consensus, &c).unwrap();
        prop_assert!((a.shift + b.shift).abs() < 1e-12);
        prop_assert_eq!(a.direction.flipped(), b.direction);
        prop_assert_eq!(a.extreme, b.extreme);
    }

    /// Adding a vote for the current majority never changes it.
    #[test]
    fn majority_is_stable(labels in prop::collection::vec(modality(), 1..9)) {
        let m = Modality::majority(labels.iter().copied()).unwrap();
        let mut more = labels.clone();
        more.push(m);
        prop_assert_eq!(Modality::majority(more).unwrap(), m);
        let counts = |x: Modality| labels.iter().filter(|&&l| l == x).count();
        let top = [Modality::Text, Modality::Image, Modality::Both].iter().map(|&x| counts(x)).max().unwrap();
        if m != Modality::Both {
            prop_assert_eq!(counts(m), top);
        }
    }
}
