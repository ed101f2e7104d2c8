//! Corpus schema, JSONL ingestion, list grouping, splitting and subsetting.

mod corpus;
mod grouping;
mod synth;

pub use corpus::{parse_corpus, parse_corpus_str, to_jsonl, write_corpus};
pub use grouping::{
    group_by_image, group_by_image_unbounded, split_corpus, subsample_fraction, training_records,
    truncate_lists, AggregationRule, CorpusSplit, ListGroup, ListItem, MAX_LIST_SIZE,
};
pub use synth::{generate_synthetic, SynthConfig, SynthCorpus};

use serde::{Deserialize, Serialize};

/// Which modality an annotator says their judgment rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Both,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Image, Modality::Both];

    pub fn index(self) -> usize {
        match self {
            Modality::Text => 0,
            Modality::Image => 1,
            Modality::Both => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Both => "both",
        }
    }

    /// Majority vote over labels; ties (and no labels) resolve to `Both`.
    pub fn majority<I: IntoIterator<Item = Modality>>(labels: I) -> Option<Modality> {
        let mut counts = [0usize; 3];
        let mut any = false;
        for m in labels {
            counts[m.index()] += 1;
            any = true;
        }
        if !any {
            return None;
        }
        let max = *counts.iter().max().unwrap();
        let winners: Vec<usize> = (0..3).filter(|&i| counts[i] == max).collect();
        if winners.len() == 1 {
            Modality::from_index(winners[0])
        } else {
            Some(Modality::Both)
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(Modality::Text),
            "image" => Ok(Modality::Image),
            "both" => Ok(Modality::Both),
            other => Err(crate::Error::Invalid(format!(
                "modality must be one of text|image|both, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub annotator_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityLabel {
    pub annotator_id: String,
    pub modality: Modality,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One image-grounded scenario with its annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario_id: String,
    pub image_id: String,
    pub image_ref: String,
    pub text: String,
    #[serde(default)]
    pub ratings: Vec<Rating>,
    #[serde(default)]
    pub modality_labels: Vec<ModalityLabel>,
    /// Source text-only norm label, `1` ("you should") or `-1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_label: Option<i8>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_canary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canary_gold: Option<u8>,
    /// Latent quality, only present in synthetic corpora.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_q: Option<f64>,
    /// Annotator who proposed this scenario through the annotation loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_by: Option<String>,
    /// Fields this version does not know about, kept for round-tripping.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ScenarioRecord {
    pub fn new(
        scenario_id: impl Into<String>,
        image_id: impl Into<String>,
        image_ref: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            image_id: image_id.into(),
            image_ref: image_ref.into(),
            text: text.into(),
            ratings: Vec::new(),
            modality_labels: Vec::new(),
            norm_label: None,
            is_canary: false,
            canary_gold: None,
            latent_q: None,
            proposed_by: None,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_ratings(mut self, scores: &[u8]) -> Self {
        self.ratings = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| Rating {
                annotator_id: format!("a{i}"),
                score,
            })
            .collect();
        self
    }

    pub fn mean_rating(&self) -> Option<f64> {
        if self.ratings.is_empty() {
            return None;
        }
        let sum: f64 = self.ratings.iter().map(|r| f64::from(r.score)).sum();
        Some(sum / self.ratings.len() as f64)
    }

    pub fn majority_modality(&self) -> Option<Modality> {
        Modality::majority(self.modality_labels.iter().map(|l| l.modality))
    }

    /// Checks the schema invariants, returning the offending field and reason.
    pub fn validate(&self) -> Result<(), (String, String)> {
        if self.scenario_id.is_empty() {
            return Err(("scenario_id".into(), "must be non-empty".into()));
        }
        if self.image_id.is_empty() {
            return Err(("image_id".into(), "must be non-empty".into()));
        }
        for (i, r) in self.ratings.iter().enumerate() {
            if !(1..=5).contains(&r.score) {
                return Err((
                    format!("ratings[{i}].score"),
                    format!("rating {} outside 1-5", r.score),
                ));
            }
        }
        if let Some(n) = self.norm_label {
            if n != 1 && n != -1 {
                return Err(("norm_label".into(), format!("must be 1 or -1, got {n}")));
            }
        }
        if let Some(g) = self.canary_gold {
            if !(1..=5).contains(&g) {
                return Err(("canary_gold".into(), format!("gold {g} outside 1-5")));
            }
        }
        if self.is_canary && self.canary_gold.is_none() {
            return Err(("canary_gold".into(), "required when is_canary is true".into()));
        }
        if self.modality_labels.len() > self.ratings.len() {
            return Err((
                "modality_labels".into(),
                format!(
                    "{} labels but only {} ratings",
                    self.modality_labels.len(),
                    self.ratings.len()
                ),
            ));
        }
        if let Some(q) = self.latent_q {
            if !q.is_finite() {
                return Err(("latent_q".into(), "must be finite".into()));
            }
        }
        Ok(())
    }
}
