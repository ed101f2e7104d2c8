use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::ScenarioRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Ordinal,
    Nominal,
}

/// Sparse items × annotators grid of integer codes.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    level: Level,
    annotators: BTreeSet<String>,
    units: Vec<Vec<(String, u8)>>,
}

impl RatingsMatrix {
    pub fn new(level: Level) -> Self {
        Self {
            level,
            annotators: BTreeSet::new(),
            units: Vec::new(),
        }
    }

    /// Adds one item. Ordinal codes must be 1-5.
    pub fn push_unit(&mut self, values: Vec<(String, u8)>) -> Result<()> {
        if self.level == Level::Ordinal {
            if let Some((_, v)) = values.iter().find(|(_, v)| !(1..=5).contains(v)) {
                return Err(Error::Invalid(format!("ordinal value {v} outside 1..=5")));
            }
        }
        for (a, _) in &values {
            self.annotators.insert(a.clone());
        }
        self.units.push(values);
        Ok(())
    }

    /// Dense rows, one column per annotator; `None` is a missing cell.
    pub fn from_rows(level: Level, rows: &[Vec<Option<u8>>]) -> Result<Self> {
        let mut m = Self::new(level);
        for row in rows {
            let unit = row
                .iter()
                .enumerate()
                .filter_map(|(j, v)| v.map(|v| (format!("c{j}"), v)))
                .collect();
            m.push_unit(unit)?;
        }
        Ok(m)
    }

    /// Scalar ratings of non-canary records.
    pub fn from_ratings(records: &[ScenarioRecord]) -> Result<Self> {
        let mut m = Self::new(Level::Ordinal);
        for r in records.iter().filter(|r| !r.is_canary) {
            m.push_unit(
                r.ratings
                    .iter()
                    .map(|x| (x.annotator_id.clone(), x.score))
                    .collect(),
            )?;
        }
        Ok(m)
    }

    /// Modality labels of non-canary records, coded by modality index.
    pub fn from_modality_labels(records: &[ScenarioRecord]) -> Self {
        let mut m = Self::new(Level::Nominal);
        for r in records.iter().filter(|r| !r.is_canary) {
            let unit = r
                .modality_labels
                .iter()
                .map(|l| (l.annotator_id.clone(), l.modality.index() as u8))
                .collect();
            m.push_unit(unit).expect("nominal codes are unrestricted");
        }
        m
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn n_items(&self) -> usize {
        self.units.len()
    }

    pub fn n_annotators(&self) -> usize {
        self.annotators.len()
    }

    /// Values of items with at least two codes.
    fn pairable_units(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        self.units
            .iter()
            .filter(|u| u.len() >= 2)
            .map(|u| u.iter().map(|(_, v)| *v).collect())
    }
}

/// Krippendorff's alpha in the coincidence-matrix form.
///
/// Ordinal distance between codes `c < k` is
/// `(sum_{g=c..k} n_g - (n_c + n_k) / 2)^2` over the pooled code frequencies.
/// A matrix with a single code in use and no disagreement gives 1.
pub fn krippendorff_alpha(matrix: &RatingsMatrix) -> Result<f64> {
    let mut coincidence: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    for unit in matrix.pairable_units() {
        let w = 1.0 / (unit.len() - 1) as f64;
        for (i, a) in unit.iter().enumerate() {
            for (j, b) in unit.iter().enumerate() {
                if i != j {
                    *coincidence.entry((*a, *b)).or_insert(0.0) += w;
                }
            }
        }
    }
    let mut marginals: BTreeMap<u8, f64> = BTreeMap::new();
    for ((c, _), o) in &coincidence {
        *marginals.entry(*c).or_insert(0.0) += o;
    }
    let n: f64 = marginals.values().sum();
    if n < 2.0 {
        return Err(Error::Undefined("krippendorff alpha needs at least 2 pairable values"));
    }
    let codes: Vec<u8> = marginals.keys().copied().collect();
    let rank: BTreeMap<u8, usize> = codes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let freq: Vec<f64> = codes.iter().map(|c| marginals[c]).collect();
    let delta = |c: u8, k: u8| -> f64 {
        if c == k {
            return 0.0;
        }
        match matrix.level {
            Level::Nominal => 1.0,
            Level::Ordinal => {
                let (lo, hi) = {
                    let (a, b) = (rank[&c], rank[&k]);
                    (a.min(b), a.max(b))
                };
                let span: f64 = freq[lo..=hi].iter().sum();
                let d = span - (freq[lo] + freq[hi]) / 2.0;
                d * d
            }
        }
    };
    let observed: f64 = coincidence.iter().map(|((c, k), o)| o * delta(*c, *k)).sum();
    let mut expected = 0.0;
    for (i, c) in codes.iter().enumerate() {
        for (j, k) in codes.iter().enumerate() {
            expected += freq[i] * freq[j] * delta(*c, *k);
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(level: Level, data: &[&[Option<u8>]]) -> RatingsMatrix {
        let owned: Vec<Vec<Option<u8>>> = data.iter().map(|r| r.to_vec()).collect();
        RatingsMatrix::from_rows(level, &owned).unwrap()
    }

    #[test]
    fn unanimous_is_one() {
        let m = rows(Level::Ordinal, &[&[Some(3), Some(3)], &[Some(5), Some(5)], &[Some(1), Some(1)]]);
        assert_eq!(krippendorff_alpha(&m).unwrap(), 1.0);
        let m = rows(Level::Nominal, &[&[Some(1), Some(1)], &[Some(1), Some(1)]]);
        assert_eq!(krippendorff_alpha(&m).unwrap(), 1.0);
    }

    #[test]
    fn two_by_two_complete_disagreement() {
        // o_AB = o_BA = 2, n_A = n_B = 2, n = 4: alpha = 1 - 3 * 4 / 8
        let m = rows(Level::Nominal, &[&[Some(0), Some(1)], &[Some(1), Some(0)]]);
        assert!((krippendorff_alpha(&m).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_worked_nominal() {
        // units {a,a}, {a,b}, {b,b}: o_aa = 2, o_ab = o_ba = 1, o_bb = 2, n = 6
        // alpha = 1 - 5 * 2 / (2 * 3 * 3) = 4/9
        let m = rows(
            Level::Nominal,
            &[&[Some(0), Some(0)], &[Some(0), Some(1)], &[Some(1), Some(1)]],
        );
        assert!((krippendorff_alpha(&m).unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn hand_worked_ordinal() {
        // units {1,2}, {2,3}, {1,1}: n_1 = 3, n_2 = 2, n_3 = 1, n = 6
        // d(1,2) = (3+2 - 2.5)^2 = 6.25, d(2,3) = (2+1 - 1.5)^2 = 2.25,
        // d(1,3) = (6 - 2)^2 = 16
        // observed = 2 * 6.25 + 2 * 2.25 = 17
        // expected = 2 * (3*2*6.25 + 2*1*2.25 + 3*1*16) = 180
        let m = rows(
            Level::Ordinal,
            &[&[Some(1), Some(2)], &[Some(2), Some(3)], &[Some(1), Some(1)]],
        );
        let want = 1.0 - 5.0 * 17.0 / 180.0;
        assert!((krippendorff_alpha(&m).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn singletons_are_not_pairable() {
        let m = rows(Level::Ordinal, &[&[Some(1), None], &[None, Some(2)]]);
        assert!(matches!(krippendorff_alpha(&m), Err(Error::Undefined(_))));
    }

    #[test]
    fn ordinal_rejects_out_of_range() {
        let mut m = RatingsMatrix::new(Level::Ordinal);
        assert!(m.push_unit(vec![("a".into(), 0)]).is_err());
    }
}
