use serde::{Deserialize, Serialize};

use crate::data::{Modality, ScenarioRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// Label counts indexed text, image, both.
    pub counts: [usize; 3],
    pub proportions: [f64; 3],
    pub zero_count: bool,
}

impl Stratum {
    fn from_counts(counts: [usize; 3]) -> Self {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Self {
                counts,
                proportions: [0.0; 3],
                zero_count: true,
            };
        }
        Self {
            counts,
            proportions: counts.map(|c| c as f64 / total as f64),
            zero_count: false,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityDistribution {
    pub overall: Stratum,
    /// Strata for rating levels 1..=5.
    pub by_rating: [Stratum; 5],
}

impl ModalityDistribution {
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<8}{:>8}{:>8}{:>8}{:>8}\n", "rating", "text", "image", "both", "n");
        let mut row = |name: String, st: &Stratum| {
            s += &format!(
                "{name:<8}{:>8.3}{:>8.3}{:>8.3}{:>8}\n",
                st.proportions[0],
                st.proportions[1],
                st.proportions[2],
                st.total()
            );
        };
        for (i, st) in self.by_rating.iter().enumerate() {
            row((i + 1).to_string(), st);
        }
        row("all".into(), &self.overall);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stratum,text,image,both,n\n");
        let strata = self
            .by_rating
            .iter()
            .enumerate()
            .map(|(i, st)| ((i + 1).to_string(), st))
            .chain(std::iter::once(("all".to_string(), &self.overall)));
        for (name, st) in strata {
            s += &format!(
                "{name},{},{},{},{}\n",
                st.proportions[0],
                st.proportions[1],
                st.proportions[2],
                st.total()
            );
        }
        s
    }
}

/// Modality label proportions overall and by rating level.
///
/// Each label is stratified by the same annotator's rating of the item, or
/// by the rounded item mean when that annotator gave no rating.
pub fn modality_distribution(records: &[ScenarioRecord]) -> ModalityDistribution {
    let mut overall = [0usize; 3];
    let mut by_rating = [[0usize; 3]; 5];
    for r in records.iter().filter(|r| !r.is_canary) {
        let fallback = r.mean_rating().map(|m| m.round() as u8);
        for l in &r.modality_labels {
            overall[l.modality.index()] += 1;
            let level = r
                .ratings
                .iter()
                .find(|x| x.annotator_id == l.annotator_id)
                .map(|x| x.score)
                .or(fallback);
            if let Some(level @ 1..=5) = level {
                by_rating[level as usize - 1][l.modality.index()] += 1;
            }
        }
    }
    ModalityDistribution {
        overall: Stratum::from_counts(overall),
        by_rating: by_rating.map(Stratum::from_counts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityAgreement {
    /// Share of same-item annotator pairs giving the same label.
    pub pairwise: f64,
    /// Share of labels equal to their item's majority label.
    pub majority_match: f64,
    pub items: usize,
}

/// Both agreement readings over items with at least two labels; `None`
/// when there are no such items.
pub fn modality_agreement(records: &[ScenarioRecord]) -> Option<ModalityAgreement> {
    let (mut agree_pairs, mut pairs, mut matches, mut labels, mut items) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for r in records.iter().filter(|r| !r.is_canary && r.modality_labels.len() >= 2) {
        items += 1;
        let ls: Vec<Modality> = r.modality_labels.iter().map(|l| l.modality).collect();
        for i in 0..ls.len() {
            for j in i + 1..ls.len() {
                pairs += 1;
                if ls[i] == ls[j] {
                    agree_pairs += 1;
                }
            }
        }
        let majority = Modality::majority(ls.iter().copied()).expect("non-empty");
        matches += ls.iter().filter(|m| **m == majority).count();
        labels += ls.len();
    }
    (items > 0).then(|| ModalityAgreement {
        pairwise: agree_pairs as f64 / pairs as f64,
        majority_match: matches as f64 / labels as f64,
        items,
    })
}
