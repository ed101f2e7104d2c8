use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One-hidden-layer tanh score head plus a linear 3-way modality head.
///
/// `score(x) = w2 . tanh(W1 x + b1) + b2`; `W1` is row-major `hidden x input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    /// Row-major `3 x input`.
    pub modality_w: Vec<f64>,
    pub modality_b: Vec<f64>,
}

/// Gradients laid out like [`ScorerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub modality_w: Vec<f64>,
    pub modality_b: Vec<f64>,
}

impl ScorerGrads {
    pub fn zeros_like(p: &ScorerParams) -> Self {
        Self {
            w1: vec![0.0; p.w1.len()],
            b1: vec![0.0; p.b1.len()],
            w2: vec![0.0; p.w2.len()],
            b2: 0.0,
            modality_w: vec![0.0; p.modality_w.len()],
            modality_b: vec![0.0; 3],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.w1,
            &self.b1,
            &self.w2,
            std::slice::from_ref(&self.b2),
            &self.modality_w,
            &self.modality_b,
        ]
    }
}

impl ScorerParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            modality_w: vec![0.0; 3 * input_dim],
            modality_b: vec![0.0; 3],
        }
    }

    /// Uniform fan-in initialization; `score_bias` seeds `b2`.
    pub fn init(input_dim: usize, hidden: usize, seed: u64, score_bias: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input_dim, hidden);
        let a1 = (1.0 / input_dim as f64).sqrt();
        let a2 = (1.0 / hidden as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        p.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        p.modality_w.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        p.b2 = score_bias;
        p
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1 + self.modality_w.len() + 3
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            std::slice::from_mut(&mut self.b2),
            &mut self.modality_w,
            &mut self.modality_b,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .chain(&self.modality_w)
            .chain(&self.modality_b)
            .all(|x| x.is_finite())
    }

    /// Checks internal shape consistency (used after deserialization).
    pub fn check_shapes(&self) -> Result<()> {
        let expect = [
            ("w1", self.hidden * self.input_dim, self.w1.len()),
            ("b1", self.hidden, self.b1.len()),
            ("w2", self.hidden, self.w2.len()),
            ("modality_w", 3 * self.input_dim, self.modality_w.len()),
            ("modality_b", 3, self.modality_b.len()),
        ];
        for (name, want, got) in expect {
            if want != got {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has {got} entries, expected {want}"
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x).0)
    }

    /// Returns the score and the hidden activations `tanh(W1 x + b1)`.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut h = Vec::with_capacity(self.hidden);
        for (row, b) in self.w1.chunks_exact(self.input_dim).zip(&self.b1) {
            let pre: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
            h.push(pre.tanh());
        }
        let s = self.w2.iter().zip(&h).map(|(w, hi)| w * hi).sum::<f64>() + self.b2;
        (s, h)
    }

    pub fn modality_logits(&self, x: &[f64]) -> Result<[f64; 3]> {
        self.check_input(x)?;
        let mut out = [0.0; 3];
        for (k, row) in self.modality_w.chunks_exact(self.input_dim).enumerate() {
            out[k] = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.modality_b[k];
        }
        Ok(out)
    }

    /// Accumulates `dscore * d score / d params` into `grads`.
    pub fn backward_score(&self, x: &[f64], hidden: &[f64], dscore: f64, grads: &mut ScorerGrads) {
        if dscore == 0.0 {
            return;
        }
        grads.b2 += dscore;
        for j in 0..self.hidden {
            grads.w2[j] += dscore * hidden[j];
            let dpre = dscore * self.w2[j] * (1.0 - hidden[j] * hidden[j]);
            if dpre == 0.0 {
                continue;
            }
            grads.b1[j] += dpre;
            let row = &mut grads.w1[j * self.input_dim..(j + 1) * self.input_dim];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += dpre * xi;
            }
        }
    }

    /// Accumulates `dlogits . d logits / d params` into `grads`.
    pub fn backward_modality(&self, x: &[f64], dlogits: &[f64; 3], grads: &mut ScorerGrads) {
        for k in 0..3 {
            let d = dlogits[k];
            grads.modality_b[k] += d;
            let row = &mut grads.modality_w[k * self.input_dim..(k + 1) * self.input_dim];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent forward pass written against the formula directly.
    fn reference_score(p: &ScorerParams, x: &[f64]) -> f64 {
        let mut s = p.b2;
        for j in 0..p.hidden {
            let mut pre = p.b1[j];
            for i in 0..p.input_dim {
                pre += p.w1[j * p.input_dim + i] * x[i];
            }
            s += p.w2[j] * pre.tanh();
        }
        s
    }

    #[test]
    fn zero_params_score_zero() {
        let p = ScorerParams::zeros(6, 4);
        assert_eq!(p.score(&[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_input_gives_bias() {
        let mut p = ScorerParams::init(5, 3, 1, 0.0);
        p.b1 = vec![0.0; 3];
        p.b2 = 2.5;
        assert_eq!(p.score(&[0.0; 5]).unwrap(), 2.5);
    }

    #[test]
    fn matches_reference_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let mut p = ScorerParams::init(7, 5, seed, 0.3);
            p.b1.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = p.score(&x).unwrap();
            let b = reference_score(&p, &x);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = ScorerParams::zeros(4, 2);
        assert!(matches!(p.score(&[0.0; 3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = ScorerParams::init(6, 4, 9, 0.1);
        p.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, h) = p.forward(&x).unwrap();
        let mut g = ScorerGrads::zeros_like(&p);
        p.backward_score(&x, &h, 1.0, &mut g);
        let flat_grads: Vec<f64> = g.tensors().iter().flat_map(|t| t.iter().copied()).collect();
        let eps = 1e-6;
        let mut k = 0;
        for t in 0..6 {
            let len = p.tensors_mut()[t].len();
            for i in 0..len {
                let mut plus = p.clone();
                plus.tensors_mut()[t][i] += eps;
                let mut minus = p.clone();
                minus.tensors_mut()[t][i] -= eps;
                let num = (plus.score(&x).unwrap() - minus.score(&x).unwrap()) / (2.0 * eps);
                assert!((num - flat_grads[k]).abs() < 1e-7, "tensor {t} idx {i}");
                k += 1;
            }
        }
    }
}
