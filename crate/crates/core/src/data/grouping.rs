use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Modality, ScenarioRecord};
use crate::hash::derive_seed;
use crate::{Error, Result};

/// Lists are capped at five scenarios per image.
pub const MAX_LIST_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationRule {
    #[default]
    Mean,
    Median,
}

impl AggregationRule {
    fn aggregate(self, record: &ScenarioRecord) -> Option<f64> {
        if record.ratings.is_empty() {
            return None;
        }
        match self {
            AggregationRule::Mean => record.mean_rating(),
            AggregationRule::Median => {
                let mut xs: Vec<u8> = record.ratings.iter().map(|r| r.score).collect();
                xs.sort_unstable();
                let n = xs.len();
                Some(if n % 2 == 1 {
                    f64::from(xs[n / 2])
                } else {
                    (f64::from(xs[n / 2 - 1]) + f64::from(xs[n / 2])) / 2.0
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListItem {
    pub scenario_id: String,
    pub text: String,
    /// Consensus gold rating in [1, 5].
    pub gold: f64,
    pub modality: Option<Modality>,
    pub latent_q: Option<f64>,
}

/// One image context and the scenarios grounded in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListGroup {
    pub image_id: String,
    pub image_ref: String,
    /// Sorted by ascending `scenario_id`.
    pub items: Vec<ListItem>,
}

impl ListGroup {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn golds(&self) -> Vec<f64> {
        self.items.iter().map(|it| it.gold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<ListGroup>,
    pub test: Vec<ListGroup>,
    pub seed: u64,
    pub ratio: f64,
}

/// Drops canaries and records without ratings.
pub fn training_records(records: &[ScenarioRecord]) -> Vec<ScenarioRecord> {
    records
        .iter()
        .filter(|r| !r.is_canary && !r.ratings.is_empty())
        .cloned()
        .collect()
}

/// Groups records by image, rejecting lists longer than [`MAX_LIST_SIZE`].
pub fn group_by_image(
    records: &[ScenarioRecord],
    rule: AggregationRule,
) -> Result<Vec<ListGroup>> {
    let groups = group_by_image_unbounded(records, rule)?;
    if let Some(g) = groups.iter().find(|g| g.len() > MAX_LIST_SIZE) {
        return Err(Error::ListTooLong {
            image_id: g.image_id.clone(),
            count: g.len(),
        });
    }
    Ok(groups)
}

/// Same as [`group_by_image`] without the length cap; pass the result
/// through [`truncate_lists`] before training on it.
pub fn group_by_image_unbounded(
    records: &[ScenarioRecord],
    rule: AggregationRule,
) -> Result<Vec<ListGroup>> {
    let mut by_image: BTreeMap<&str, Vec<&ScenarioRecord>> = BTreeMap::new();
    for r in records {
        by_image.entry(r.image_id.as_str()).or_default().push(r);
    }
    let mut groups = Vec::with_capacity(by_image.len());
    for (image_id, mut recs) in by_image {
        recs.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
        let mut items = Vec::with_capacity(recs.len());
        for r in &recs {
            let gold = rule.aggregate(r).ok_or_else(|| Error::InvalidRecord {
                scenario_id: r.scenario_id.clone(),
                message: "no ratings to aggregate".into(),
            })?;
            items.push(ListItem {
                scenario_id: r.scenario_id.clone(),
                text: r.text.clone(),
                gold,
                modality: r.majority_modality(),
                latent_q: r.latent_q,
            });
        }
        groups.push(ListGroup {
            image_id: image_id.to_string(),
            image_ref: recs[0].image_ref.clone(),
            items,
        });
    }
    Ok(groups)
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Splits at image granularity. `ratio` is the train share.
pub fn split_corpus(groups: &[ListGroup], ratio: f64, seed: u64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0,1), got {ratio}")));
    }
    if groups.is_empty() {
        return Err(Error::Config("cannot split an empty corpus".into()));
    }
    let n = groups.len();
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n);
    if n_train == n {
        log::warn!("split of {n} group(s) at ratio {ratio} leaves the test side empty");
    }
    let order = shuffled_indices(n, derive_seed(seed, "split"));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (g, t) in groups.iter().zip(is_train) {
        if t {
            train.push(g.clone());
        } else {
            test.push(g.clone());
        }
    }
    Ok(CorpusSplit {
        train,
        test,
        seed,
        ratio,
    })
}

/// Keeps at most `m` scenarios per group, sampled uniformly without
/// replacement. Selection for `m` is a prefix of the selection for any
/// larger `m` under the same seed.
pub fn truncate_lists(groups: &[ListGroup], m: usize, seed: u64) -> Vec<ListGroup> {
    assert!(m >= 1, "list size must be at least 1");
    groups
        .iter()
        .map(|g| {
            if g.len() <= m {
                return g.clone();
            }
            let group_seed = derive_seed(seed, &format!("truncate/{}", g.image_id));
            let order = shuffled_indices(g.len(), group_seed);
            let mut keep: Vec<usize> = order[..m].to_vec();
            keep.sort_unstable();
            ListGroup {
                image_id: g.image_id.clone(),
                image_ref: g.image_ref.clone(),
                items: keep.into_iter().map(|i| g.items[i].clone()).collect(),
            }
        })
        .collect()
}

/// Keeps `ceil(f * |groups|)` groups chosen uniformly under `seed`.
pub fn subsample_fraction(groups: &[ListGroup], f: f64, seed: u64) -> Result<Vec<ListGroup>> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Config(format!("fraction must be in (0,1], got {f}")));
    }
    let n = groups.len();
    // Guard against 0.1 * 30 = 3.0000000000000004 style overshoot.
    let k = ((f * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let k = k.min(n);
    if k == n {
        return Ok(groups.to_vec());
    }
    let order = shuffled_indices(n, derive_seed(seed, "fraction"));
    let mut keep: Vec<usize> = order[..k].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| groups[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn rec(sid: &str, img: &str, scores: &[u8]) -> ScenarioRecord {
        ScenarioRecord::new(sid, img, format!("file://{img}"), format!("text {sid}"))
            .with_ratings(scores)
    }

    fn groups(n: usize, size: usize) -> Vec<ListGroup> {
        (0..n)
            .map(|g| ListGroup {
                image_id: format!("img{g:04}"),
                image_ref: String::new(),
                items: (0..size)
                    .map(|i| ListItem {
                        scenario_id: format!("img{g:04}-s{i}"),
                        text: String::new(),
                        gold: (i % 5 + 1) as f64,
                        modality: None,
                        latent_q: None,
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn groups_single_image() {
        let recs = vec![rec("c", "i", &[5]), rec("a", "i", &[5]), rec("b", "i", &[5])];
        let g = group_by_image(&recs, AggregationRule::Mean).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].golds(), vec![5.0, 5.0, 5.0]);
        let ids: Vec<_> = g[0].items.iter().map(|i| i.scenario_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn gold_is_mean() {
        let g = group_by_image(&[rec("a", "i", &[3, 4, 5])], AggregationRule::Mean).unwrap();
        assert_eq!(g[0].items[0].gold, 4.0);
        let g = group_by_image(&[rec("a", "i", &[1, 4, 5])], AggregationRule::Median).unwrap();
        assert_eq!(g[0].items[0].gold, 4.0);
    }

    #[test]
    fn seven_scenarios_rejected() {
        let recs: Vec<_> = (0..7).map(|i| rec(&format!("s{i}"), "i", &[3])).collect();
        assert!(matches!(
            group_by_image(&recs, AggregationRule::Mean),
            Err(Error::ListTooLong { count: 7, .. })
        ));
        let g = group_by_image_unbounded(&recs, AggregationRule::Mean).unwrap();
        assert_eq!(truncate_lists(&g, 5, 0)[0].len(), 5);
    }

    #[test]
    fn unrated_record_rejected() {
        let recs = vec![ScenarioRecord::new("a", "i", "", "t")];
        assert!(group_by_image(&recs, AggregationRule::Mean).is_err());
        assert!(training_records(&recs).is_empty());
    }

    #[test]
    fn split_counts_and_determinism() {
        let g = groups(10, 3);
        let s = split_corpus(&g, 0.9, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (9, 1));
        assert_eq!(s, split_corpus(&g, 0.9, 7).unwrap());
    }

    #[test]
    fn split_hundred_disjoint() {
        let g = groups(100, 2);
        let s = split_corpus(&g, 0.9, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (90, 10));
        let train: HashSet<_> = s.train.iter().map(|g| &g.image_id).collect();
        let test: HashSet<_> = s.test.iter().map(|g| &g.image_id).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), 100);
    }

    #[test]
    fn split_single_group_warns_not_errors() {
        let s = split_corpus(&groups(1, 2), 0.9, 0).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 0));
    }

    #[test]
    fn split_rejects_bad_ratio() {
        assert!(split_corpus(&groups(3, 2), 1.0, 0).is_err());
        assert!(split_corpus(&[], 0.5, 0).is_err());
    }

    #[test]
    fn truncation_cases() {
        let g = groups(20, 5);
        assert_eq!(truncate_lists(&g, 5, 1), g);
        assert!(truncate_lists(&g, 1, 1).iter().all(|g| g.len() == 1));
        assert_eq!(truncate_lists(&g, 2, 9), truncate_lists(&g, 2, 9));
    }

    #[test]
    fn fraction_cases() {
        let g = groups(100, 1);
        assert_eq!(subsample_fraction(&g, 1.0, 0).unwrap(), g);
        assert_eq!(subsample_fraction(&g, 0.5, 0).unwrap().len(), 50);
        assert_eq!(
            subsample_fraction(&g, 0.25, 4).unwrap(),
            subsample_fraction(&g, 0.25, 4).unwrap()
        );
        assert_eq!(subsample_fraction(&groups(30, 1), 0.1, 0).unwrap().len(), 3);
        assert_eq!(subsample_fraction(&groups(7, 1), 0.5, 0).unwrap().len(), 4);
        assert!(subsample_fraction(&g, 0.0, 0).is_err());
    }
}
