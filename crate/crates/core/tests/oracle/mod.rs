//! Brute-force reference implementations, written from the metric
//! definitions without reusing library code.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Position of item `i` in the predicted order: one plus the number of items
/// that beat it on score, or tie and have a lower index.
fn rank_of(pred: &[f64], i: usize) -> usize {
    1 + (0..pred.len())
        .filter(|&j| pred[j] > pred[i] || (pred[j] == pred[i] && j < i))
        .count()
}

fn dcg_of(order: &[usize], gold: &[f64], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &i)| (2f64.powf(gold[i]) - 1.0) / (pos as f64 + 2.0).log2())
        .sum()
}

/// NDCG@k with the ideal DCG found by trying every ordering.
pub fn ndcg(pred: &[f64], gold: &[f64], k: usize) -> f64 {
    let n = pred.len();
    let mut order = vec![0; n];
    for i in 0..n {
        order[rank_of(pred, i) - 1] = i;
    }
    let ideal = permutations(n)
        .iter()
        .map(|p| dcg_of(p, gold, k))
        .fold(f64::MIN, f64::max);
    if ideal == 0.0 {
        1.0
    } else {
        dcg_of(&order, gold, k) / ideal
    }
}

pub fn reciprocal_rank(pred: &[f64], gold: &[f64]) -> f64 {
    let best = gold.iter().cloned().fold(f64::MIN, f64::max);
    let target = gold.iter().position(|&g| g == best).unwrap();
    1.0 / rank_of(pred, target) as f64
}

pub fn unsafe_rate(pred: &[f64], gold: &[f64]) -> f64 {
    let unsafe_items: Vec<usize> = (0..gold.len()).filter(|&i| gold[i] <= 2.5).collect();
    if unsafe_items.is_empty() {
        return 0.0;
    }
    unsafe_items.iter().filter(|&&i| pred[i] > 2.5).count() as f64 / unsafe_items.len() as f64
}

/// Thresholds 1.0, 1.1, ..., 5.0 ascending; TPR and FPR only grow with the
/// threshold, so the curve needs no sorting.
pub fn auc_safety(pred: &[f64], gold: &[f64]) -> f64 {
    let pos = gold.iter().filter(|&&g| g <= 2.5).count() as f64;
    let neg = gold.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.5;
    }
    let mut pts = vec![(0.0, 0.0)];
    for step in 10..=50 {
        let t = step as f64 / 10.0;
        let flagged = |unsafe_class: bool| {
            (0..gold.len())
                .filter(|&i| (gold[i] <= 2.5) == unsafe_class && pred[i] <= t)
                .count() as f64
        };
        pts.push((flagged(false) / neg, flagged(true) / pos));
    }
    pts.push((1.0, 1.0));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut s, mut n1, mut n2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..i {
            let x = (a[i] - a[j]).signum() * if a[i] == a[j] { 0.0 } else { 1.0 };
            let y = (b[i] - b[j]).signum() * if b[i] == b[j] { 0.0 } else { 1.0 };
            s += x * y;
            n1 += x * x;
            n2 += y * y;
        }
    }
    if n1 == 0.0 || n2 == 0.0 {
        0.0
    } else {
        s / (n1 * n2).sqrt()
    }
}

pub fn ece(probs: &[f64], outcomes: &[bool], bins: usize) -> f64 {
    let which = |p: f64| (0..bins).find(|&b| p <= (b + 1) as f64 / bins as f64).unwrap();
    let mut total = 0.0;
    for b in 0..bins {
        let members: Vec<usize> = (0..probs.len()).filter(|&i| which(probs[i]) == b).collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let conf = members.iter().map(|&i| probs[i]).sum::<f64>() / m;
        let freq = members.iter().filter(|&&i| outcomes[i]).count() as f64 / m;
        total += m / probs.len() as f64 * (conf - freq).abs();
    }
    total
}

/// Negative log Plackett-Luce probability of `perm` under `scores`.
pub fn plackett_luce_nll(scores: &[f64], perm: &[usize]) -> f64 {
    let mut nll = 0.0;
    for k in 0..perm.len() {
        let rest: f64 = perm[k..].iter().map(|&j| scores[j].exp()).sum();
        nll -= (scores[perm[k]].exp() / rest).ln();
    }
    nll
}

/// Krippendorff's alpha in the pairwise form: mean squared distance within
/// units over mean squared distance across all pairable values.
pub fn alpha(units: &[Vec<u8>], ordinal: bool) -> f64 {
    let units: Vec<&Vec<u8>> = units.iter().filter(|u| u.len() >= 2).collect();
    let mut freq: BTreeMap<u8, f64> = BTreeMap::new();
    for u in &units {
        for &v in u.iter() {
            *freq.entry(v).or_default() += 1.0;
        }
    }
    let n: f64 = freq.values().sum();
    let dist = |a: u8, b: u8| -> f64 {
        if a == b {
            return 0.0;
        }
        if !ordinal {
            return 1.0;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let span: f64 = freq.range(lo..=hi).map(|(_, c)| c).sum();
        (span - (freq[&lo] + freq[&hi]) / 2.0).powi(2)
    };
    let mut within = 0.0;
    for u in &units {
        let m = u.len() as f64;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    within += dist(u[i], u[j]) / (m - 1.0);
                }
            }
        }
    }
    let pooled: Vec<u8> = units.iter().flat_map(|u| u.iter().copied()).collect();
    let mut across = 0.0;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j {
                across += dist(pooled[i], pooled[j]);
            }
        }
    }
    let d_o = within / n;
    let d_e = across / (n * (n - 1.0));
    if d_e == 0.0 {
        1.0
    } else {
        1.0 - d_o / d_e
    }
}
