//! Annotator-side statistics: reliability, screening, canaries, modality
//! attribution and judgment shifts against text-only norms.

mod alpha;
mod modality;
mod screening;
mod shift;

pub use alpha::{krippendorff_alpha, Level, RatingsMatrix};
pub use modality::{modality_agreement, modality_distribution, ModalityAgreement, ModalityDistribution, Stratum};
pub use screening::{
    canary_pass_rate, canary_passes, canary_report, sample_stdev, screen_annotators, screen_items,
    AnnotatorScreen, CanaryRate, ItemScreen, CANARY_BAND, CANARY_MIN_PASS_RATE, DEFAULT_MAD_MAX,
    DEFAULT_STDEV_MAX,
};
pub use shift::{
    shift_direction, shift_records, shift_tables, Direction, DirectionRow, ExtremeRow, ModalityRow, Shift,
    ShiftConfig, ShiftRecord, ShiftTables, EXTREME_SHIFT,
};

use serde::{Deserialize, Serialize};

use crate::data::ListGroup;
use crate::exec::Exec;
use crate::features::Featurizer;
use crate::metrics::{kendall_tau, ndcg_at_k, score_groups, ScoredGroup};
use crate::model::{LossType, ScorerParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelAgreement {
    pub kendall_tau_mean: f64,
    pub ndcg5_mean: f64,
    pub groups: usize,
}

/// Mean tau and NDCG@5 between model rankings and consensus rankings over
/// lists with at least two items.
pub fn agreement_from_scored(groups: &[ScoredGroup]) -> Result<ModelAgreement> {
    let (mut tau, mut ndcg, mut n) = (0.0, 0.0, 0usize);
    for g in groups.iter().filter(|g| g.pred.len() >= 2) {
        tau += kendall_tau(&g.pred, &g.gold)?;
        ndcg += ndcg_at_k(&g.pred, &g.gold, 5)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Invalid("model agreement needs lists with at least 2 items".into()));
    }
    Ok(ModelAgreement {
        kendall_tau_mean: tau / n as f64,
        ndcg5_mean: ndcg / n as f64,
        groups: n,
    })
}

pub fn model_annotator_agreement(
    params: &ScorerParams,
    groups: &[ListGroup],
    featurizer: &Featurizer,
    loss: LossType,
    exec: Exec,
) -> Result<ModelAgreement> {
    agreement_from_scored(&score_groups(params, groups, featurizer, loss, exec)?)
}
