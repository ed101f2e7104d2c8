use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub mean_predicted: f64,
    pub observed_freq: f64,
    pub count: usize,
}

/// Predicted acceptability from a 1-5 scalar: `clamp((s - 1) / 4, 0, 1)`.
pub fn acceptability_prob(score: f64) -> f64 {
    ((score - 1.0) / 4.0).clamp(0.0, 1.0)
}

/// Index of the equal-width bin holding `p`. The first bin is `[0, 1/B]`,
/// the others `(lo, hi]`.
pub fn bin_index(p: f64, n_bins: usize) -> usize {
    let b = n_bins as f64;
    let mut idx = ((p * b).ceil() as usize).saturating_sub(1).min(n_bins - 1);
    // correct for rounding in p * b against the exact edges i / B
    while idx > 0 && p <= idx as f64 / b {
        idx -= 1;
    }
    while idx + 1 < n_bins && p > (idx + 1) as f64 / b {
        idx += 1;
    }
    idx
}

/// Expected calibration error with `n_bins` equal-width bins on [0, 1].
pub fn ece(probs: &[f64], outcomes: &[bool], n_bins: usize) -> Result<(f64, Vec<ReliabilityBin>)> {
    if probs.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: outcomes.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::Invalid("ece needs at least one bin".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Invalid(format!("probability {p} outside [0,1]")));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_o = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (p, o) in probs.iter().zip(outcomes) {
        let i = bin_index(*p, n_bins);
        sum_p[i] += p;
        sum_o[i] += if *o { 1.0 } else { 0.0 };
        count[i] += 1;
    }
    let n = probs.len() as f64;
    let mut total = 0.0;
    let mut bins = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let (mean_predicted, observed_freq) = if count[i] == 0 {
            (0.0, 0.0)
        } else {
            (sum_p[i] / count[i] as f64, sum_o[i] / count[i] as f64)
        };
        if count[i] > 0 {
            total += count[i] as f64 / n * (mean_predicted - observed_freq).abs();
        }
        bins.push(ReliabilityBin {
            bin_lo: i as f64 / n_bins as f64,
            bin_hi: (i + 1) as f64 / n_bins as f64,
            mean_predicted,
            observed_freq,
            count: count[i],
        });
    }
    Ok((total, bins))
}
