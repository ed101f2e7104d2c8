use serde::{Deserialize, Serialize};

use crate::data::{Modality, ScenarioRecord};
use crate::{Error, Result};

pub const EXTREME_SHIFT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Up,
    Neutral,
    Down,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Neutral => Direction::Neutral,
            Direction::Down => Direction::Up,
        }
    }
}

/// Scalar baselines for text-only norm labels, and the neutral band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub positive_baseline: f64,
    pub negative_baseline: f64,
    pub neutral_band: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            positive_baseline: 5.0,
            negative_baseline: 1.0,
            neutral_band: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub shift: f64,
    pub direction: Direction,
    pub extreme: bool,
}

pub fn shift_direction(norm_label: i8, consensus: f64, config: &ShiftConfig) -> Result<Shift> {
    let baseline = match norm_label {
        1 => config.positive_baseline,
        -1 => config.negative_baseline,
        other => return Err(Error::Invalid(format!("norm_label must be 1 or -1, got {other}"))),
    };
    if !(1.0..=5.0).contains(&consensus) {
        return Err(Error::Invalid(format!("consensus {consensus} outside [1,5]")));
    }
    let shift = consensus - baseline;
    let direction = if shift.abs() <= config.neutral_band {
        Direction::Neutral
    } else if shift < 0.0 {
        Direction::Down
    } else {
        Direction::Up
    };
    Ok(Shift {
        shift,
        direction,
        extreme: shift.abs() >= EXTREME_SHIFT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub scenario_id: String,
    pub norm_label: i8,
    pub consensus: f64,
    pub modality: Modality,
    pub shift: f64,
    pub direction: Direction,
    pub extreme: bool,
}

/// Shift records for non-canary items with a norm label, ratings and at
/// least one modality label. Modality is the label majority.
pub fn shift_records(records: &[ScenarioRecord], config: &ShiftConfig) -> Result<Vec<ShiftRecord>> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| !r.is_canary) {
        let (Some(norm_label), Some(consensus), Some(modality)) =
            (r.norm_label, r.mean_rating(), r.majority_modality())
        else {
            continue;
        };
        let s = shift_direction(norm_label, consensus, config)?;
        out.push(ShiftRecord {
            scenario_id: r.scenario_id.clone(),
            norm_label,
            consensus,
            modality,
            shift: s.shift,
            direction: s.direction,
            extreme: s.extreme,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionRow {
    pub up: usize,
    pub neutral: usize,
    pub down: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtremeRow {
    /// Extreme shifts on items whose norm label is +1.
    pub positive: usize,
    pub negative: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityRow<T> {
    pub image: T,
    pub text: T,
    pub both: T,
}

impl<T> ModalityRow<T> {
    pub fn get_mut(&mut self, m: Modality) -> &mut T {
        match m {
            Modality::Image => &mut self.image,
            Modality::Text => &mut self.text,
            Modality::Both => &mut self.both,
        }
    }

    /// Rows in display order: image-only, text-only, both.
    pub fn rows(&self) -> [(&'static str, &T); 3] {
        [("image-only", &self.image), ("text-only", &self.text), ("both", &self.both)]
    }
}

impl<T: Default> Default for ModalityRow<T> {
    fn default() -> Self {
        Self {
            image: T::default(),
            text: T::default(),
            both: T::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftTables {
    pub directions: ModalityRow<DirectionRow>,
    pub extremes: ModalityRow<ExtremeRow>,
}

impl ShiftTables {
    pub fn grand_total(&self) -> usize {
        self.directions.rows().iter().map(|(_, r)| r.total).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<12}{:>8}{:>9}{:>8}{:>8}\n", "modality", "UP", "NEUTRAL", "DOWN", "Total");
        for (name, r) in self.directions.rows() {
            s += &format!("{name:<12}{:>8}{:>9}{:>8}{:>8}\n", r.up, r.neutral, r.down, r.total);
        }
        s += &format!("\n{:<12}{:>8}{:>8}{:>8}\n", "extreme", "+1", "-1", "Total");
        for (name, r) in self.extremes.rows() {
            s += &format!("{name:<12}{:>8}{:>8}{:>8}\n", r.positive, r.negative, r.total);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("modality,up,neutral,down,total,extreme_pos,extreme_neg,extreme_total\n");
        for ((name, d), (_, e)) in self.directions.rows().into_iter().zip(self.extremes.rows()) {
            s += &format!(
                "{name},{},{},{},{},{},{},{}\n",
                d.up, d.neutral, d.down, d.total, e.positive, e.negative, e.total
            );
        }
        s
    }
}

pub fn shift_tables(shifts: &[ShiftRecord]) -> ShiftTables {
    let mut t = ShiftTables::default();
    for s in shifts {
        let row = t.directions.get_mut(s.modality);
        match s.direction {
            Direction::Up => row.up += 1,
            Direction::Neutral => row.neutral += 1,
            Direction::Down => row.down += 1,
        }
        row.total += 1;
        if s.extreme {
            let e = t.extremes.get_mut(s.modality);
            if s.norm_label > 0 {
                e.positive += 1;
            } else {
                e.negative += 1;
            }
            e.total += 1;
        }
    }
    t
}
