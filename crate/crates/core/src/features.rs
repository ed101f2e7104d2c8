//! Deterministic hashed features for scenario text and image contexts.
//!
//! Text: lowercase, split on Unicode whitespace, strip every character that is
//! not alphanumeric, drop empty tokens. Each unigram `t` and each adjacent
//! bigram `"a b"` (single ASCII space) is hashed with FNV-1a 64 over its UTF-8
//! bytes; bucket = `hash % dim`, sign = `-1` if bit 63 is set else `+1`. The
//! signed counts are L2-normalized.
//!
//! Images: looked up by `image_id` in an optional sidecar table. Missing ids
//! get a stub vector whose entry `i` is derived from `fnv1a64("{image_id}#{i}")`
//! mapped to `[-1, 1)`, then L2-normalized.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::hash::fnv1a64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    TextOnly,
    ImageOnly,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
    /// Set when any part came from the hashed image stub rather than a table.
    pub stub: bool,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2(&self.values)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = l2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Bucket index and sign for one hashed token or bigram.
pub fn bucket(key: &str, dim: usize) -> (usize, f64) {
    let h = fnv1a64(key);
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Signed unigram + bigram counts before normalization.
pub fn hashed_counts(text: &str, dim: usize) -> Vec<f64> {
    assert!(dim > 0, "feature dimension must be positive");
    let tokens = tokenize(text);
    let mut v = vec![0.0; dim];
    for t in &tokens {
        let (b, s) = bucket(t, dim);
        v[b] += s;
    }
    for pair in tokens.windows(2) {
        let (b, s) = bucket(&format!("{} {}", pair[0], pair[1]), dim);
        v[b] += s;
    }
    v
}

pub fn featurize_text(text: &str, dim: usize) -> FeatureVector {
    let mut values = hashed_counts(text, dim);
    normalize(&mut values);
    FeatureVector {
        values,
        provenance: Provenance::TextOnly,
        stub: false,
    }
}

/// Stub image vector derived only from the id.
pub fn image_stub(image_id: &str, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|i| {
            let h = fnv1a64(&format!("{image_id}#{i}"));
            // top 53 bits -> [0,1) -> [-1,1)
            (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    normalize(&mut v);
    v
}

/// Precomputed image vectors keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct ImageFeatureTable {
    vectors: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct TableRow {
    image_id: String,
    vector: Vec<f64>,
}

impl ImageFeatureTable {
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: TableRow = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            if row.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("image feature table"));
            }
            vectors.insert(row.image_id, row.vector);
        }
        Ok(Self { vectors })
    }

    pub fn insert(&mut self, image_id: impl Into<String>, vector: Vec<f64>) {
        self.vectors.insert(image_id.into(), vector);
    }

    pub fn get(&self, image_id: &str) -> Option<&[f64]> {
        self.vectors.get(image_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn featurize_image(
    image_id: &str,
    dim: usize,
    table: Option<&ImageFeatureTable>,
) -> Result<FeatureVector> {
    if let Some(v) = table.and_then(|t| t.get(image_id)) {
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: v.len(),
            });
        }
        return Ok(FeatureVector {
            values: v.to_vec(),
            provenance: Provenance::ImageOnly,
            stub: false,
        });
    }
    Ok(FeatureVector {
        values: image_stub(image_id, dim),
        provenance: Provenance::ImageOnly,
        stub: true,
    })
}

pub fn combine_features(text: &FeatureVector, image: &FeatureVector) -> Result<FeatureVector> {
    if text.dim() != image.dim() {
        return Err(Error::Dimension {
            expected: text.dim(),
            actual: image.dim(),
        });
    }
    let mut values = Vec::with_capacity(2 * text.dim());
    values.extend_from_slice(&text.values);
    values.extend_from_slice(&image.values);
    Ok(FeatureVector {
        values,
        provenance: Provenance::Combined,
        stub: text.stub || image.stub,
    })
}

/// Text + image featurizer producing `2 * dim` inputs for the scorer.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub dim: usize,
    pub table: Option<ImageFeatureTable>,
}

impl Featurizer {
    pub fn new(dim: usize) -> Self {
        Self { dim, table: None }
    }

    pub fn with_table(dim: usize, table: ImageFeatureTable) -> Self {
        Self {
            dim,
            table: Some(table),
        }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn features(&self, image_id: &str, text: &str) -> Result<Vec<f64>> {
        let t = featurize_text(text, self.dim);
        let i = featurize_image(image_id, self.dim, self.table.as_ref())?;
        Ok(combine_features(&t, &i)?.values)
    }
}
