use crate::{Error, Result};

/// Item indices in predicted order: descending score, ties by ascending index.
pub fn predicted_order(pred: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pred.len()).collect();
    idx.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]).then(a.cmp(&b)));
    idx
}

fn gain(rel: f64) -> f64 {
    rel.exp2() - 1.0
}

fn dcg(rels: impl Iterator<Item = f64>, k: usize) -> f64 {
    rels.take(k)
        .enumerate()
        .map(|(i, r)| gain(r) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k with exponential gain `2^rel - 1` and `log2(i + 1)` discount.
pub fn ndcg_at_k(pred: &[f64], gold: &[f64], k: usize) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() || k == 0 {
        return Err(Error::Invalid("ndcg needs n >= 1 and k >= 1".into()));
    }
    let actual = dcg(predicted_order(pred).into_iter().map(|i| gold[i]), k);
    let mut ideal: Vec<f64> = gold.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let best = dcg(ideal.into_iter(), k);
    if best == 0.0 {
        return Ok(1.0);
    }
    Ok(actual / best)
}

/// Reciprocal rank of the top gold item (lowest index among tied maxima).
pub fn reciprocal_rank(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Invalid("reciprocal rank of an empty list".into()));
    }
    let mut target = 0;
    for i in 1..gold.len() {
        if gold[i] > gold[target] {
            target = i;
        }
    }
    let rank = predicted_order(pred)
        .iter()
        .position(|&i| i == target)
        .expect("target is in the order")
        + 1;
    Ok(1.0 / rank as f64)
}

/// Mean reciprocal rank over `(pred, gold)` lists.
pub fn mrr(lists: &[(&[f64], &[f64])]) -> Result<f64> {
    if lists.is_empty() {
        return Err(Error::Invalid("mrr over zero lists".into()));
    }
    let mut sum = 0.0;
    for (p, g) in lists {
        sum += reciprocal_rank(p, g)?;
    }
    Ok(sum / lists.len() as f64)
}

/// Kendall's tau-b between two score vectors.
///
/// Returns 0 when either side is constant (the tie-corrected denominator
/// vanishes).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Invalid("kendall tau needs at least 2 items".into()));
    }
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].total_cmp(&a[j]);
            let db = b[i].total_cmp(&b[j]);
            let tie_a = a[i] == a[j];
            let tie_b = b[i] == b[j];
            if tie_a {
                ties_a += 1;
            }
            if tie_b {
                ties_b += 1;
            }
            if tie_a || tie_b {
                continue;
            }
            if da == db {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as u64;
    let denom = (((pairs - ties_a) * (pairs - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((concordant as f64 - discordant as f64) / denom)
}
