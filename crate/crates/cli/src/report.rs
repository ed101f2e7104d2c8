//! Human-readable tables and the agreement report.

use morale_core::agreement::{
    canary_report, krippendorff_alpha, modality_agreement, modality_distribution, screen_annotators, screen_items,
    shift_records, shift_tables, AnnotatorScreen, CanaryRate, ModalityAgreement, ModalityDistribution, ModelAgreement,
    RatingsMatrix, ShiftConfig, ShiftTables,
};
use morale_core::data::ScenarioRecord;
use morale_core::metrics::MetricReport;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub fn metrics_header() -> String {
    format!(
        "{:<10}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}\n",
        "loss", "NDCG@5", "MRR", "Unsafe", "AUC-S", "tau-b", "ECE"
    )
}

pub fn metrics_row(name: &str, r: &MetricReport) -> String {
    format!(
        "{:<10}{:>9.4}{:>9.4}{:>9.4}{:>9.4}{:>9.4}{:>9.4}\n",
        name, r.ndcg_at_5, r.mrr, r.unsafe_rate, r.auc_safety, r.kendall_tau, r.ece
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSummary {
    pub stdev_max: f64,
    pub kept: usize,
    pub removed: usize,
    pub removal_fraction: f64,
    pub removed_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    /// Ordinal alpha over every rated item.
    pub ordinal: Option<f64>,
    /// Ordinal alpha after the stdev screen.
    pub ordinal_screened: Option<f64>,
    /// Nominal alpha over modality labels.
    pub modality_nominal: Option<f64>,
}

/// Agreement report. Field order is fixed; values that cannot be computed
/// are `null` and named in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub items: usize,
    pub annotators: usize,
    pub alpha: AlphaReport,
    pub screening: ScreeningSummary,
    pub annotator_screen: Vec<AnnotatorScreen>,
    pub canaries: Vec<CanaryRate>,
    pub shift_config: ShiftConfig,
    pub shift_records: usize,
    pub shift: ShiftTables,
    pub modality: ModalityDistribution,
    pub modality_agreement: Option<ModalityAgreement>,
    pub model: Option<ModelAgreement>,
    pub notes: Vec<String>,
}

fn alpha_or_note(matrix: CliResult<RatingsMatrix>, what: &str, notes: &mut Vec<String>) -> CliResult<Option<f64>> {
    match krippendorff_alpha(&matrix?) {
        Ok(a) => Ok(Some(a)),
        Err(morale_core::Error::Undefined(_)) => {
            notes.push(format!("{what}: undefined (fewer than two pairable values)"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn agreement_report(
    records: &[ScenarioRecord],
    stdev_max: f64,
    mad_max: f64,
    shift_config: ShiftConfig,
    model: Option<ModelAgreement>,
) -> CliResult<AgreementReport> {
    let mut notes = Vec::new();
    let regular: Vec<ScenarioRecord> = records.iter().filter(|r| !r.is_canary).cloned().collect();
    let screen = screen_items(&regular, stdev_max);

    let alpha = AlphaReport {
        ordinal: alpha_or_note(RatingsMatrix::from_ratings(&regular).map_err(Into::into), "alpha (ordinal)", &mut notes)?,
        ordinal_screened: alpha_or_note(
            RatingsMatrix::from_ratings(&screen.kept).map_err(Into::into),
            "alpha (ordinal, screened)",
            &mut notes,
        )?,
        modality_nominal: alpha_or_note(
            Ok(RatingsMatrix::from_modality_labels(&regular)),
            "alpha (nominal, modality)",
            &mut notes,
        )?,
    };

    let shifts = shift_records(records, &shift_config)?;
    let modality_agreement = modality_agreement(records);
    if modality_agreement.is_none() {
        notes.push("modality agreement: no item has two or more labels".into());
    }
    let mut annotators: Vec<&str> = regular
        .iter()
        .flat_map(|r| r.ratings.iter().map(|x| x.annotator_id.as_str()))
        .collect();
    annotators.sort_unstable();
    annotators.dedup();

    Ok(AgreementReport {
        items: regular.len(),
        annotators: annotators.len(),
        alpha,
        screening: ScreeningSummary {
            stdev_max,
            kept: screen.kept.len(),
            removed: screen.removed.len(),
            removal_fraction: screen.removal_fraction(),
            removed_ids: screen.removed.iter().map(|r| r.scenario_id.clone()).collect(),
        },
        annotator_screen: screen_annotators(records, mad_max),
        canaries: canary_report(records),
        shift_config,
        shift_records: shifts.len(),
        shift: shift_tables(&shifts),
        modality: modality_distribution(records),
        modality_agreement,
        model,
        notes,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

impl AgreementReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("items {}  annotators {}\n", self.items, self.annotators);
        s += &format!(
            "alpha ordinal {}  screened {}  modality (nominal) {}\n",
            opt(self.alpha.ordinal),
            opt(self.alpha.ordinal_screened),
            opt(self.alpha.modality_nominal)
        );
        s += &format!(
            "screening stdev > {}: removed {} of {} ({:.1}%)\n",
            self.screening.stdev_max,
            self.screening.removed,
            self.screening.kept + self.screening.removed,
            100.0 * self.screening.removal_fraction
        );
        let flagged = self.annotator_screen.iter().filter(|a| a.flagged).count();
        s += &format!("annotators flagged by deviation: {flagged}\n");
        let canary_flagged = self.canaries.iter().filter(|c| c.flagged).count();
        s += &format!("annotators below canary pass rate: {canary_flagged} of {}\n", self.canaries.len());
        if let Some(m) = &self.modality_agreement {
            s += &format!(
                "modality agreement: pairwise {:.3}  majority match {:.3}  ({} items)\n",
                m.pairwise, m.majority_match, m.items
            );
        }
        s += "\nmodality attribution\n";
        s += &self.modality.to_text();
        s += &format!("\njudgment shifts ({} records)\n", self.shift_records);
        s += &self.shift.to_text();
        if let Some(m) = &self.model {
            s += &format!(
                "\nmodel vs annotators: tau-b {:.4}  NDCG@5 {:.4}  ({} lists)\n",
                m.kendall_tau_mean, m.ndcg5_mean, m.groups
            );
        }
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s
    }
}
