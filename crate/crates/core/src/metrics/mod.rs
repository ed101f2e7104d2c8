//! Ranking, safety and calibration metrics plus the batch evaluation driver.

mod calibration;
mod ranking;
mod safety;

pub use calibration::{acceptability_prob, bin_index, ece, ReliabilityBin};
pub use ranking::{kendall_tau, mrr, ndcg_at_k, predicted_order, reciprocal_rank};
pub use safety::{
    auc_safety, sweep_threshold, unsafe_rate, AucSafety, SweepPoint, ThresholdSweep, UnsafeRate,
    SWEEP_POINTS,
};

use serde::{Deserialize, Serialize};

use crate::data::ListGroup;
use crate::exec::Exec;
use crate::features::Featurizer;
use crate::model::{LossType, ScorerParams, UNSAFE_THRESHOLD};
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub image_id: String,
    pub n: usize,
    pub ndcg_at_5: f64,
    pub reciprocal_rank: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kendall_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ndcg_at_5: f64,
    pub mrr: f64,
    pub unsafe_rate: f64,
    pub auc_safety: f64,
    pub kendall_tau: f64,
    pub ece: f64,
    pub reliability_bins: Vec<ReliabilityBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_group: Option<Vec<GroupMetrics>>,
}

impl MetricReport {
    pub fn is_finite(&self) -> bool {
        [
            self.ndcg_at_5,
            self.mrr,
            self.unsafe_rate,
            self.auc_safety,
            self.kendall_tau,
            self.ece,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn scenario_count(&self) -> usize {
        self.reliability_bins.iter().map(|b| b.count).sum()
    }
}

/// Reported scores for one list, aligned with its gold ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroup {
    pub image_id: String,
    pub pred: Vec<f64>,
    pub gold: Vec<f64>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Builds a report from already-scored lists. Sums run in list order.
pub fn report_from_scored(groups: &[ScoredGroup], per_group: bool) -> Result<MetricReport> {
    if groups.is_empty() {
        return Err(Error::Invalid("evaluation over an empty test set".into()));
    }
    let mut details = Vec::with_capacity(groups.len());
    for g in groups {
        let tau = if g.pred.len() >= 2 {
            Some(kendall_tau(&g.pred, &g.gold)?)
        } else {
            None
        };
        details.push(GroupMetrics {
            image_id: g.image_id.clone(),
            n: g.pred.len(),
            ndcg_at_5: ndcg_at_k(&g.pred, &g.gold, 5)?,
            reciprocal_rank: reciprocal_rank(&g.pred, &g.gold)?,
            kendall_tau: tau,
        });
    }
    let ndcg: Vec<f64> = details.iter().map(|d| d.ndcg_at_5).collect();
    let rr: Vec<f64> = details.iter().map(|d| d.reciprocal_rank).collect();
    let taus: Vec<f64> = details.iter().filter_map(|d| d.kendall_tau).collect();

    let pred: Vec<f64> = groups.iter().flat_map(|g| g.pred.iter().copied()).collect();
    let gold: Vec<f64> = groups.iter().flat_map(|g| g.gold.iter().copied()).collect();
    let unsafe_r = unsafe_rate(&pred, &gold, UNSAFE_THRESHOLD)?;
    let auc = auc_safety(&pred, &gold)?;
    if unsafe_r.empty_denominator {
        log::warn!("no gold-unsafe items in evaluation set; unsafe rate reported as 0");
    }
    if auc.degenerate {
        log::warn!("single-class evaluation set; AUC-Safety reported as 0.5");
    }
    let probs: Vec<f64> = pred.iter().map(|s| acceptability_prob(*s)).collect();
    let outcomes: Vec<bool> = gold.iter().map(|g| *g > UNSAFE_THRESHOLD).collect();
    let (ece_value, bins) = ece(&probs, &outcomes, DEFAULT_BINS)?;

    Ok(MetricReport {
        ndcg_at_5: mean(&ndcg),
        mrr: mean(&rr),
        unsafe_rate: unsafe_r.value,
        auc_safety: auc.auc,
        kendall_tau: mean(&taus),
        ece: ece_value,
        reliability_bins: bins,
        per_group: per_group.then_some(details),
    })
}

/// Scores every list with the reported-scale scalar for `loss`.
pub fn score_groups(
    params: &ScorerParams,
    groups: &[ListGroup],
    featurizer: &Featurizer,
    loss: LossType,
    exec: Exec,
) -> Result<Vec<ScoredGroup>> {
    let scored = exec.map(groups, |g| -> Result<ScoredGroup> {
        let mut pred = Vec::with_capacity(g.len());
        for item in &g.items {
            let x = featurizer.features(&g.image_id, &item.text)?;
            pred.push(loss.report_score(params.score(&x)?));
        }
        Ok(ScoredGroup {
            image_id: g.image_id.clone(),
            pred,
            gold: g.golds(),
        })
    });
    scored.into_iter().collect()
}

pub fn evaluate(
    params: &ScorerParams,
    groups: &[ListGroup],
    featurizer: &Featurizer,
    loss: LossType,
    exec: Exec,
) -> Result<MetricReport> {
    let scored = score_groups(params, groups, featurizer, loss, exec)?;
    report_from_scored(&scored, false)
}
