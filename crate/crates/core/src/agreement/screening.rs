use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ScenarioRecord;

pub const DEFAULT_STDEV_MAX: f64 = 1.2;
pub const DEFAULT_MAD_MAX: f64 = 1.5;
pub const CANARY_BAND: u8 = 1;
pub const CANARY_MIN_PASS_RATE: f64 = 0.98;

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_stdev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemScreen {
    pub kept: Vec<ScenarioRecord>,
    pub removed: Vec<ScenarioRecord>,
}

impl ItemScreen {
    pub fn removal_fraction(&self) -> f64 {
        let total = self.kept.len() + self.removed.len();
        if total == 0 {
            0.0
        } else {
            self.removed.len() as f64 / total as f64
        }
    }
}

/// Drops records whose rating stdev exceeds `stdev_max`. Records with fewer
/// than two ratings are kept.
pub fn screen_items(records: &[ScenarioRecord], stdev_max: f64) -> ItemScreen {
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for r in records {
        let scores: Vec<f64> = r.ratings.iter().map(|x| x.score as f64).collect();
        match sample_stdev(&scores) {
            Some(sd) if sd > stdev_max => removed.push(r.clone()),
            _ => kept.push(r.clone()),
        }
    }
    ItemScreen { kept, removed }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorScreen {
    pub annotator_id: String,
    pub items: usize,
    /// Mean absolute deviation from the item mean rating.
    pub mad: f64,
    pub flagged: bool,
}

/// Per-annotator mean absolute deviation from item consensus, over
/// non-canary items rated by at least two annotators.
pub fn screen_annotators(records: &[ScenarioRecord], mad_max: f64) -> Vec<AnnotatorScreen> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_canary && r.ratings.len() >= 2) {
        let consensus = r.mean_rating().expect("rated");
        for x in &r.ratings {
            let e = acc.entry(x.annotator_id.as_str()).or_insert((0.0, 0));
            e.0 += (x.score as f64 - consensus).abs();
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(id, (sum, n))| {
            let mad = sum / n as f64;
            AnnotatorScreen {
                annotator_id: id.to_string(),
                items: n,
                mad,
                flagged: mad > mad_max,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanaryRate {
    pub annotator_id: String,
    pub passes: usize,
    pub total: usize,
    /// `None` when the annotator rated no canaries.
    pub rate: Option<f64>,
    pub flagged: bool,
}

pub fn canary_passes(score: u8, gold: u8) -> bool {
    score.abs_diff(gold) <= CANARY_BAND
}

/// Share of canaries the annotator rated within one point of gold.
/// Flagged strictly below 98%.
pub fn canary_pass_rate(annotator_id: &str, records: &[ScenarioRecord]) -> CanaryRate {
    let (mut passes, mut total) = (0, 0);
    for r in records.iter().filter(|r| r.is_canary) {
        let Some(gold) = r.canary_gold else { continue };
        for x in r.ratings.iter().filter(|x| x.annotator_id == annotator_id) {
            total += 1;
            if canary_passes(x.score, gold) {
                passes += 1;
            }
        }
    }
    let rate = (total > 0).then(|| passes as f64 / total as f64);
    CanaryRate {
        annotator_id: annotator_id.to_string(),
        passes,
        total,
        rate,
        flagged: rate.is_some_and(|r| r < CANARY_MIN_PASS_RATE),
    }
}

/// Canary rates for every annotator who rated at least one canary.
pub fn canary_report(records: &[ScenarioRecord]) -> Vec<CanaryRate> {
    let mut ids: Vec<&str> = records
        .iter()
        .filter(|r| r.is_canary)
        .flat_map(|r| r.ratings.iter().map(|x| x.annotator_id.as_str()))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter().map(|id| canary_pass_rate(id, records)).collect()
}
