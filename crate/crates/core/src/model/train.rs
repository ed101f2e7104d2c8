//! Listwise training loop: one image list per optimizer step.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{modality_loss, mse_aux_loss, LossType};
use super::optim::{adamw_step, AdamWConfig, AdamWState};
use super::params::{ScorerGrads, ScorerParams};
use crate::data::{ListGroup, Modality};
use crate::exec::Exec;
use crate::features::Featurizer;
use crate::hash::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossType,
    pub lr: f64,
    pub epochs: usize,
    /// Maximum scenarios per training list (`m`).
    pub list_size: usize,
    /// Share of training groups kept (`f`).
    pub fraction: f64,
    pub aux_mse_weight: f64,
    pub modality_weight: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub hidden: usize,
    /// Per-modality feature width; the scorer sees twice this.
    pub feature_dim: usize,
    pub split_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_loss(LossType::ListMle)
    }
}

impl TrainConfig {
    /// Defaults for one objective. The auxiliary MSE term belongs to the
    /// listwise recipe, so the binary objectives default it to zero.
    pub fn for_loss(loss: LossType) -> Self {
        let adam = AdamWConfig::default();
        Self {
            loss,
            lr: adam.lr,
            epochs: 5,
            list_size: 5,
            fraction: 1.0,
            aux_mse_weight: if loss == LossType::ListMle { 0.1 } else { 0.0 },
            modality_weight: 0.1,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weight_decay: adam.weight_decay,
            seed: 0,
            hidden: 64,
            feature_dim: 512,
            split_ratio: 0.9,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(1..=5).contains(&self.list_size) {
            return bad(format!("list_size must be in 1..=5, got {}", self.list_size));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return bad(format!("fraction must be in (0,1], got {}", self.fraction));
        }
        if !(self.aux_mse_weight >= 0.0) || !(self.modality_weight >= 0.0) {
            return bad("loss weights must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must be in [0,1)".into());
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps must be > 0 and weight_decay >= 0".into());
        }
        if self.hidden == 0 || self.feature_dim == 0 {
            return bad("hidden and feature_dim must be > 0".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio must be in (0,1), got {}", self.split_ratio));
        }
        Ok(())
    }

    /// Initial score-head bias: the middle of the rating scale on the
    /// reported (1-5) scale.
    fn initial_bias(&self) -> f64 {
        match self.loss {
            LossType::Bce => 0.0,
            _ => 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub history: Vec<EpochStats>,
    pub steps: usize,
}

/// A group with its precomputed feature rows.
pub struct FeaturizedGroup<'a> {
    pub group: &'a ListGroup,
    pub features: Vec<Vec<f64>>,
}

pub fn featurize_groups<'a>(
    groups: &'a [ListGroup],
    featurizer: &Featurizer,
    exec: Exec,
) -> Result<Vec<FeaturizedGroup<'a>>> {
    exec.map(groups, |g| {
        let features = g
            .items
            .iter()
            .map(|it| featurizer.features(&g.image_id, &it.text))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeaturizedGroup { group: g, features })
    })
    .into_iter()
    .collect()
}

pub fn train(
    config: &TrainConfig,
    groups: &[ListGroup],
    featurizer: &Featurizer,
) -> Result<TrainOutcome> {
    let data = featurize_groups(groups, featurizer, Exec::Parallel)?;
    train_featurized(config, &data, featurizer.input_dim())
}

/// Per-group loss and gradient accumulation. Returns `None` when the group
/// carries no training signal under this configuration.
fn group_step(
    config: &TrainConfig,
    params: &ScorerParams,
    fg: &FeaturizedGroup<'_>,
    grads: &mut ScorerGrads,
) -> Result<Option<f64>> {
    let items = &fg.group.items;
    let n = items.len();
    let mut raw = Vec::with_capacity(n);
    let mut hidden = Vec::with_capacity(n);
    for x in &fg.features {
        let (s, h) = params.forward(x)?;
        raw.push(s);
        hidden.push(h);
    }
    let gold = fg.group.golds();
    let main = config.loss.main_loss(&raw, &gold)?;
    let main_active = !main.skipped && !(config.loss == LossType::ListMle && n < 2);

    let labeled: Vec<(usize, Modality)> = items
        .iter()
        .enumerate()
        .filter_map(|(i, it)| it.modality.map(|m| (i, m)))
        .collect();
    let mse_active = config.aux_mse_weight > 0.0;
    let mod_active = config.modality_weight > 0.0 && !labeled.is_empty();
    if !(main_active || mse_active || mod_active) {
        return Ok(None);
    }

    let mut total = 0.0;
    let mut dscore = vec![0.0; n];
    if main_active {
        total += main.value;
        for (d, g) in dscore.iter_mut().zip(&main.grad) {
            *d += g;
        }
    }
    if mse_active {
        let reported: Vec<f64> = raw.iter().map(|&r| config.loss.report_score(r)).collect();
        let mse = mse_aux_loss(&reported, &gold)?;
        total += config.aux_mse_weight * mse.value;
        for i in 0..n {
            dscore[i] +=
                config.aux_mse_weight * mse.grad[i] * config.loss.report_score_derivative(raw[i]);
        }
    }
    for i in 0..n {
        params.backward_score(&fg.features[i], &hidden[i], dscore[i], grads);
    }
    if mod_active {
        let w = config.modality_weight / labeled.len() as f64;
        for (i, m) in labeled {
            let logits = params.modality_logits(&fg.features[i])?;
            let r = modality_loss(&logits, m)?;
            total += w * r.value;
            let d = [w * r.grad[0], w * r.grad[1], w * r.grad[2]];
            params.backward_modality(&fg.features[i], &d, grads);
        }
    }
    Ok(Some(total))
}

/// Trains on pre-featurized groups. Deterministic for a fixed config.
pub fn train_featurized(
    config: &TrainConfig,
    data: &[FeaturizedGroup<'_>],
    input_dim: usize,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    let mut params = ScorerParams::init(
        input_dim,
        config.hidden,
        derive_seed(config.seed, "init"),
        config.initial_bias(),
    );
    let hyper = config.adamw();
    let mut state = AdamWState::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "shuffle"));
    let mut history = Vec::with_capacity(config.epochs);
    let mut total_steps = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for &gi in &order {
            let mut grads = ScorerGrads::zeros_like(&params);
            let Some(loss) = group_step(config, &params, &data[gi], &mut grads)? else {
                continue;
            };
            let mut tensors = params.tensors_mut();
            adamw_step(&mut tensors, &grads.tensors(), &mut state, &hyper);
            loss_sum += loss;
            steps += 1;
        }
        if steps == 0 {
            return Err(Error::Training(format!(
                "every group was skipped under loss `{}` (e.g. all gold ratings tied or single-item lists with no auxiliary loss)",
                config.loss
            )));
        }
        if !params.is_finite() {
            return Err(Error::Training(format!("parameters diverged in epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: mean loss {:.6} over {steps} steps", loss_sum / steps as f64);
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / steps as f64,
            steps,
        });
        total_steps += steps;
    }
    Ok(TrainOutcome {
        params,
        history,
        steps: total_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, group_by_image, AggregationRule, ListItem, SynthConfig};

    fn tiny_group(golds: &[f64]) -> ListGroup {
        ListGroup {
            image_id: "img".into(),
            image_ref: String::new(),
            items: golds
                .iter()
                .enumerate()
                .map(|(i, &g)| ListItem {
                    scenario_id: format!("s{i}"),
                    text: format!("token{i} other{i}"),
                    gold: g,
                    modality: None,
                    latent_q: None,
                })
                .collect(),
        }
    }

    fn quick(loss: LossType) -> TrainConfig {
        TrainConfig {
            feature_dim: 16,
            hidden: 8,
            ..TrainConfig::for_loss(loss)
        }
    }

    #[test]
    fn one_epoch_one_group_one_step() {
        let cfg = TrainConfig {
            epochs: 1,
            ..quick(LossType::ListMle)
        };
        let f = Featurizer::new(cfg.feature_dim);
        let out = train(&cfg, &[tiny_group(&[5.0, 3.0, 1.0])], &f).unwrap();
        assert_eq!(out.steps, 1);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn deterministic_params() {
        let cfg = quick(LossType::Bpo);
        let f = Featurizer::new(cfg.feature_dim);
        let groups = vec![tiny_group(&[5.0, 3.0, 1.0]), tiny_group(&[2.0, 4.0])];
        let a = train(&cfg, &groups, &f).unwrap();
        let b = train(&cfg, &groups, &f).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn all_tied_bpo_fails() {
        let cfg = TrainConfig {
            modality_weight: 0.0,
            ..quick(LossType::Bpo)
        };
        let f = Featurizer::new(cfg.feature_dim);
        let err = train(&cfg, &[tiny_group(&[3.0, 3.0])], &f).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn single_item_lists_train_through_mse() {
        let cfg = quick(LossType::ListMle);
        let f = Featurizer::new(cfg.feature_dim);
        let out = train(&cfg, &[tiny_group(&[4.0])], &f).unwrap();
        assert_eq!(out.steps, cfg.epochs);
    }

    #[test]
    fn loss_decreases_on_noise_free_corpus() {
        let synth = generate_synthetic(&SynthConfig {
            n_groups: 300,
            noise_std: 0.0,
            seed: 4,
            feature_dim: 32,
            ..SynthConfig::default()
        })
        .unwrap();
        let groups = group_by_image(&synth.records, AggregationRule::Mean).unwrap();
        let cfg = TrainConfig {
            feature_dim: 32,
            hidden: 16,
            lr: 1e-3,
            ..TrainConfig::for_loss(LossType::ListMle)
        };
        let out = train(&cfg, &groups, &Featurizer::new(32)).unwrap();
        let first = out.history.first().unwrap().mean_loss;
        let last = out.history.last().unwrap().mean_loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn full_step_gradient_matches_finite_differences() {
        // total loss of one group as a function of every parameter
        let mut g = tiny_group(&[5.0, 2.0, 3.0, 1.0]);
        g.items[0].modality = Some(Modality::Image);
        g.items[2].modality = Some(Modality::Text);
        let f = Featurizer::new(8);
        let data = featurize_groups(std::slice::from_ref(&g), &f, Exec::Sequential).unwrap();
        for loss in LossType::ALL {
            let cfg = TrainConfig {
                feature_dim: 8,
                hidden: 5,
                aux_mse_weight: 0.3,
                modality_weight: 0.2,
                ..TrainConfig::for_loss(loss)
            };
            let params = ScorerParams::init(16, 5, 1, 0.5);
            let mut grads = ScorerGrads::zeros_like(&params);
            group_step(&cfg, &params, &data[0], &mut grads).unwrap();
            let flat: Vec<f64> = grads.tensors().iter().flat_map(|t| t.to_vec()).collect();
            let value = |p: &ScorerParams| {
                let mut scratch = ScorerGrads::zeros_like(p);
                group_step(&cfg, p, &data[0], &mut scratch).unwrap().unwrap()
            };
            let eps = 1e-6;
            let mut k = 0;
            for t in 0..6 {
                let len = params.clone().tensors_mut()[t].len();
                for i in 0..len {
                    let mut up = params.clone();
                    up.tensors_mut()[t][i] += eps;
                    let mut down = params.clone();
                    down.tensors_mut()[t][i] -= eps;
                    let num = (value(&up) - value(&down)) / (2.0 * eps);
                    assert!(
                        (num - flat[k]).abs() < 1e-6 * (1.0 + num.abs()),
                        "{loss:?} tensor {t}[{i}]: {num} vs {}",
                        flat[k]
                    );
                    k += 1;
                }
            }
        }
    }
}
