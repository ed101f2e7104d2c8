//! Supervision objectives with analytic gradients w.r.t. the raw scores.

use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::{Error, Result};

/// Gold ratings at or below this are treated as unsafe.
pub const UNSAFE_THRESHOLD: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossType {
    /// Listwise ListMLE over the gold ordering.
    #[serde(rename = "lipo", alias = "listmle")]
    ListMle,
    /// Pairwise Bradley-Terry logistic loss over ordered pairs.
    #[serde(rename = "bpo")]
    Bpo,
    /// Binary cross-entropy on safe/unsafe labels.
    #[serde(rename = "bce")]
    Bce,
}

impl LossType {
    pub const ALL: [LossType; 3] = [LossType::ListMle, LossType::Bpo, LossType::Bce];

    pub fn cli_name(self) -> &'static str {
        match self {
            LossType::ListMle => "lipo",
            LossType::Bpo => "bpo",
            LossType::Bce => "bce",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            LossType::ListMle => "ListMLE",
            LossType::Bpo => "BPO",
            LossType::Bce => "BCE",
        }
    }

    pub fn main_loss(self, scores: &[f64], gold: &[f64]) -> Result<LossResult> {
        match self {
            LossType::ListMle => listmle_loss(scores, gold),
            LossType::Bpo => bpo_loss(scores, gold),
            LossType::Bce => bce_loss(scores, gold),
        }
    }

    /// Maps a raw head output onto the 1-5 rating scale used by the metrics.
    /// BCE logits go through `1 + 4 * sigmoid`; the other heads are already
    /// scalar ratings.
    pub fn report_score(self, raw: f64) -> f64 {
        match self {
            LossType::Bce => 1.0 + 4.0 * sigmoid(raw),
            _ => raw,
        }
    }

    /// Derivative of [`LossType::report_score`].
    pub fn report_score_derivative(self, raw: f64) -> f64 {
        match self {
            LossType::Bce => {
                let p = sigmoid(raw);
                4.0 * p * (1.0 - p)
            }
            _ => 1.0,
        }
    }
}

impl std::str::FromStr for LossType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lipo" | "listmle" => Ok(LossType::ListMle),
            "bpo" => Ok(LossType::Bpo),
            "bce" => Ok(LossType::Bce),
            other => Err(Error::Invalid(format!(
                "unknown loss `{other}` (expected lipo, bpo or bce)"
            ))),
        }
    }
}

impl std::fmt::Display for LossType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.cli_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// Gradient w.r.t. each input coordinate (scores, or logits for the
    /// modality loss).
    pub grad: Vec<f64>,
    /// Set when the objective had nothing to learn from (e.g. no ordered
    /// pairs for BPO).
    pub skipped: bool,
}

impl LossResult {
    fn zero(n: usize, skipped: bool) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; n],
            skipped,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check(scores: &[f64], gold: &[f64]) -> Result<()> {
    if scores.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: gold.len(),
        });
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    if gold.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gold ratings"));
    }
    Ok(())
}

/// Indices ordered by descending gold; ties keep ascending index order.
/// Group items are sorted by scenario id, so this breaks ties by id.
pub fn target_permutation(gold: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gold.len()).collect();
    idx.sort_by(|&a, &b| gold[b].total_cmp(&gold[a]).then(a.cmp(&b)));
    idx
}

/// Negative Plackett-Luce log-likelihood of the gold ordering.
pub fn listmle_loss(scores: &[f64], gold: &[f64]) -> Result<LossResult> {
    check(scores, gold)?;
    listmle_loss_for_permutation(scores, &target_permutation(gold))
}

/// ListMLE against an explicit target permutation (`perm[t]` is the item
/// placed at position `t`).
pub fn listmle_loss_for_permutation(scores: &[f64], perm: &[usize]) -> Result<LossResult> {
    let n = scores.len();
    if perm.len() != n {
        return Err(Error::LengthMismatch { left: n, right: perm.len() });
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    if n <= 1 {
        return Ok(LossResult::zero(n, false));
    }
    let s: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
    // lse[t] = log sum_{j >= t} exp(s[j])
    let mut lse = vec![0.0; n];
    lse[n - 1] = s[n - 1];
    for t in (0..n - 1).rev() {
        lse[t] = log_add_exp(s[t], lse[t + 1]);
    }
    // Term t equals softplus(lse[t+1] - s[t]); the last term is zero.
    let value: f64 = (0..n - 1).map(|t| softplus(lse[t + 1] - s[t])).sum();

    let mut grad_sorted = vec![0.0; n];
    for k in 0..n {
        let mut g = 0.0;
        for t in 0..k.min(n - 1) {
            g += (s[k] - lse[t]).exp();
        }
        if k < n - 1 {
            // -(1 - p_k(k)) = -sigmoid(lse[k+1] - s[k])
            g -= sigmoid(lse[k + 1] - s[k]);
        }
        grad_sorted[k] = g;
    }
    let mut grad = vec![0.0; n];
    for (pos, &item) in perm.iter().enumerate() {
        grad[item] = grad_sorted[pos];
    }
    Ok(LossResult {
        value,
        grad,
        skipped: false,
    })
}

/// Mean of `-log sigmoid(s_i - s_j)` over pairs with `gold_i > gold_j`.
pub fn bpo_loss(scores: &[f64], gold: &[f64]) -> Result<LossResult> {
    check(scores, gold)?;
    let n = scores.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if gold[i] > gold[j] {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Ok(LossResult::zero(n, true));
    }
    let p = pairs.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for (i, j) in pairs {
        let d = scores[i] - scores[j];
        value += softplus(-d);
        let w = sigmoid(-d) / p;
        grad[i] -= w;
        grad[j] += w;
    }
    Ok(LossResult {
        value: value / p,
        grad,
        skipped: false,
    })
}

/// Mean binary cross-entropy with label `gold > 2.5` and logit = score.
pub fn bce_loss(scores: &[f64], gold: &[f64]) -> Result<LossResult> {
    check(scores, gold)?;
    let n = scores.len();
    if n == 0 {
        return Ok(LossResult::zero(0, true));
    }
    let nf = n as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let s = scores[i];
        if gold[i] > UNSAFE_THRESHOLD {
            value += softplus(-s);
            grad[i] = -sigmoid(-s) / nf;
        } else {
            value += softplus(s);
            grad[i] = sigmoid(s) / nf;
        }
    }
    Ok(LossResult {
        value: value / nf,
        grad,
        skipped: false,
    })
}

pub fn mse_aux_loss(scores: &[f64], gold: &[f64]) -> Result<LossResult> {
    check(scores, gold)?;
    let n = scores.len();
    if n == 0 {
        return Ok(LossResult::zero(0, true));
    }
    let nf = n as f64;
    let value = scores.iter().zip(gold).map(|(s, g)| (s - g).powi(2)).sum::<f64>() / nf;
    let grad = scores.iter().zip(gold).map(|(s, g)| 2.0 * (s - g) / nf).collect();
    Ok(LossResult {
        value,
        grad,
        skipped: false,
    })
}

/// Softmax cross-entropy over (text, image, both) logits.
pub fn modality_loss(logits: &[f64], label: Modality) -> Result<LossResult> {
    if logits.len() != 3 {
        return Err(Error::LengthMismatch { left: logits.len(), right: 3 });
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("modality logits"));
    }
    let y = label.index();
    let d: Vec<f64> = logits.iter().map(|l| l - logits[y]).collect();
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let others: f64 = (0..3).filter(|&k| k != y).map(|k| d[k].exp()).sum();
    let value = if max <= 0.0 {
        others.ln_1p()
    } else {
        max + ((-max).exp() + (0..3).filter(|&k| k != y).map(|k| (d[k] - max).exp()).sum::<f64>()).ln()
    };
    let lmax = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - lmax).exp()).collect();
    let z: f64 = exps.iter().sum();
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    // p_y - 1 written as minus the mass on the other classes
    grad[y] = -(0..3).filter(|&k| k != y).map(|k| grad[k]).sum::<f64>();
    Ok(LossResult {
        value,
        grad,
        skipped: false,
    })
}
