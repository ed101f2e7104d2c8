use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First/second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamWState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// One AdamW update over a list of tensors, in place.
///
/// Weight decay is decoupled: `p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)`.
pub fn adamw_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamWState,
    hyper: &AdamWConfig,
) {
    assert_eq!(params.len(), grads.len(), "tensor count mismatch");
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        assert_eq!(p.len(), g.len(), "tensor {k} shape mismatch");
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for i in 0..p.len() {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= hyper.lr * (m_hat / (v_hat.sqrt() + hyper.eps) + hyper.weight_decay * p[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step1(p: &mut f64, g: f64, st: &mut AdamWState, h: &AdamWConfig) {
        let mut ps = [std::slice::from_mut(p)];
        adamw_step(&mut ps, &[&[g]], st, h);
    }

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let h = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut st = AdamWState::default();
        let mut p = 1.234;
        for _ in 0..5 {
            step1(&mut p, 0.0, &mut st, &h);
        }
        assert_eq!(p, 1.234);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let h = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        for g in [3.0, -0.02, 1e-3] {
            let mut st = AdamWState::default();
            let mut p = 0.5;
            step1(&mut p, g, &mut st, &h);
            let expected = 0.5 - h.lr * g.signum();
            assert!((p - expected).abs() < 1e-8 * h.lr / g.abs().min(1.0) + 1e-12);
        }
    }

    #[test]
    fn three_step_trajectory() {
        // Recurrences unrolled by hand for lr=0.1, b1=0.9, b2=0.999, eps=1e-8,
        // wd=0.01, p0=1.0, grads (0.5, -0.25, 1.0).
        let h = AdamWConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        };
        let grads = [0.5, -0.25, 1.0];
        let mut p_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for (i, g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p_ref = p_ref - 0.1 * (mh / (vh.sqrt() + 1e-8)) - 0.1 * 0.01 * p_ref;
            expected.push(p_ref);
        }
        // Frozen from an independent spreadsheet-style evaluation.
        let frozen = [0.8990000020, 0.8714672987, 0.8047846724];
        for (e, f) in expected.iter().zip(frozen) {
            assert!((e - f).abs() < 1e-9, "{e} vs {f}");
        }
        let mut st = AdamWState::default();
        let mut p = 1.0;
        for (g, e) in grads.iter().zip(&expected) {
            step1(&mut p, *g, &mut st, &h);
            assert!((p - e).abs() < 1e-12);
        }
        assert_eq!(st.step, 3);
    }
}
