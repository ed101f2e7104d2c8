//! Synthetic corpora with a known latent quality per scenario.
//!
//! Scenario texts are bags of vocabulary tokens (`w0000`, `w0001`, ...).
//! The text quality is linear in the hashed text features the scorer sees:
//! `q_text = base_quality + <theta, featurize_text(text)>`, where `theta`
//! holds one Gaussian weight per bucket and each "harm" token pushes its
//! bucket down by `harm_weight` (in the direction of that token's hash sign).
//! Every scenario of an image also receives an image offset, a fixed linear
//! projection of the image's stub feature vector. The scenario's modality is
//! whichever part dominates: image when `|offset| > modality_ratio * |q_text -
//! base|`, text in the mirrored case, both otherwise. Annotators observe
//! `clamp(round(q + N(0, noise_std)), 1, 5)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Modality, ModalityLabel, Rating, ScenarioRecord};
use crate::features::{bucket, featurize_text, image_stub};
use crate::hash::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_groups: usize,
    pub list_size_min: usize,
    pub list_size_max: usize,
    pub feature_dim: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub annotators_per_item: usize,
    pub vocab_size: usize,
    pub tokens_min: usize,
    pub tokens_max: usize,
    pub base_quality: f64,
    pub token_weight_std: f64,
    pub harm_fraction: f64,
    pub harm_weight: f64,
    /// Non-harm token weights are `|N(0, token_weight_std)|` instead of
    /// `N(0, token_weight_std)`.
    pub one_sided: bool,
    pub image_effect_std: f64,
    /// Dominance factor deciding text / image / both modality.
    pub modality_ratio: f64,
    /// Probability an annotator reports the scenario's true modality.
    pub modality_label_accuracy: f64,
    /// Fraction of scenarios emitted as canaries with a gold rating.
    pub canary_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_groups: 2000,
            list_size_min: 3,
            list_size_max: 5,
            feature_dim: 512,
            noise_std: 0.5,
            seed: 0,
            annotators_per_item: 3,
            vocab_size: 3000,
            tokens_min: 4,
            tokens_max: 8,
            base_quality: 4.4,
            token_weight_std: 0.3,
            harm_fraction: 0.0,
            harm_weight: 8.0,
            one_sided: false,
            image_effect_std: 0.3,
            modality_ratio: 2.0,
            modality_label_accuracy: 0.8,
            canary_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.list_size_min < 1 || self.list_size_min > self.list_size_max || self.list_size_max > 5 {
            return bad(format!(
                "list_size range must satisfy 1 <= min <= max <= 5, got ({}, {})",
                self.list_size_min, self.list_size_max
            ));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be > 0".into());
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.annotators_per_item == 0 {
            return bad("annotators_per_item must be >= 1".into());
        }
        if self.vocab_size == 0 || self.tokens_min == 0 || self.tokens_min > self.tokens_max {
            return bad("vocabulary and token counts must be positive with tokens_min <= tokens_max".into());
        }
        for (name, p) in [
            ("harm_fraction", self.harm_fraction),
            ("modality_label_accuracy", self.modality_label_accuracy),
            ("canary_fraction", self.canary_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0,1], got {p}"));
            }
        }
        if self.token_weight_std < 0.0 || self.image_effect_std < 0.0 {
            return bad("standard deviations must be >= 0".into());
        }
        if !(self.modality_ratio >= 1.0) {
            return bad(format!("modality_ratio must be >= 1, got {}", self.modality_ratio));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<ScenarioRecord>,
    /// Latent quality per record, aligned with `records`.
    pub latent: Vec<f64>,
}

fn modality_for(text_effect: f64, image_effect: f64, ratio: f64) -> Modality {
    let (t, i) = (text_effect.abs(), image_effect.abs());
    if i > ratio * t {
        Modality::Image
    } else if t > ratio * i {
        Modality::Text
    } else {
        Modality::Both
    }
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let cfg = config;

    let dim = cfg.feature_dim;
    let mut theta_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth/theta"));
    let weight_dist = Normal::new(0.0, cfg.token_weight_std).expect("validated std");
    let mut theta = vec![0.0; dim];
    for t in 0..cfg.vocab_size {
        let w = if theta_rng.random::<f64>() < cfg.harm_fraction {
            -cfg.harm_weight
        } else {
            let w: f64 = weight_dist.sample(&mut theta_rng);
            if cfg.one_sided { w.abs() } else { w }
        };
        let (b, sign) = bucket(&format!("w{t:04}"), dim);
        theta[b] += sign * w;
    }

    let mut proj_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth/image-projection"));
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut projection: Vec<f64> = (0..dim).map(|_| std_normal.sample(&mut proj_rng)).collect();
    let pn = projection.iter().map(|x| x * x).sum::<f64>().sqrt();
    projection.iter_mut().for_each(|x| *x /= pn);

    let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth/corpus"));
    let mut records = Vec::new();
    let mut latent = Vec::new();

    for g in 0..cfg.n_groups {
        let image_id = format!("img{g:06}");
        let stub = image_stub(&image_id, dim);
        // unit-variance projection of a random unit vector
        let z: f64 = stub.iter().zip(&projection).map(|(a, b)| a * b).sum::<f64>() * (dim as f64).sqrt();
        let image_offset = cfg.image_effect_std * z;
        let n = rng.random_range(cfg.list_size_min..=cfg.list_size_max);
        for s in 0..n {
            let k = rng.random_range(cfg.tokens_min..=cfg.tokens_max);
            let words: Vec<String> = (0..k)
                .map(|_| format!("w{:04}", rng.random_range(0..cfg.vocab_size)))
                .collect();
            let text = words.join(" ");
            let x = featurize_text(&text, dim).values;
            let text_effect: f64 = theta.iter().zip(&x).map(|(a, b)| a * b).sum();
            let q_text = cfg.base_quality + text_effect;
            let q = q_text + image_offset;
            let modality = modality_for(text_effect, image_offset, cfg.modality_ratio);

            let mut ratings = Vec::with_capacity(cfg.annotators_per_item);
            let mut labels = Vec::with_capacity(cfg.annotators_per_item);
            for a in 0..cfg.annotators_per_item {
                let eps = if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                let score = (q + eps).round().clamp(1.0, 5.0) as u8;
                let annotator_id = format!("synth-a{a}");
                let reported = if rng.random::<f64>() < cfg.modality_label_accuracy {
                    modality
                } else {
                    let others: Vec<Modality> =
                        Modality::ALL.into_iter().filter(|m| *m != modality).collect();
                    others[rng.random_range(0..2)]
                };
                ratings.push(Rating {
                    annotator_id: annotator_id.clone(),
                    score,
                });
                labels.push(ModalityLabel {
                    annotator_id,
                    modality: reported,
                });
            }

            let mut rec = ScenarioRecord::new(
                format!("{image_id}-s{s}"),
                image_id.clone(),
                format!("synthetic://images/{image_id}.png"),
                text,
            );
            rec.ratings = ratings;
            rec.modality_labels = labels;
            rec.norm_label = Some(if q_text >= 3.0 { 1 } else { -1 });
            rec.latent_q = Some(q);
            if cfg.canary_fraction > 0.0 && rng.random::<f64>() < cfg.canary_fraction {
                rec.is_canary = true;
                rec.canary_gold = Some(q.round().clamp(1.0, 5.0) as u8);
            }
            records.push(rec);
            latent.push(q);
        }
    }
    Ok(SynthCorpus { records, latent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{group_by_image, to_jsonl, AggregationRule};

    fn small(seed: u64, noise: f64) -> SynthConfig {
        SynthConfig {
            n_groups: 200,
            noise_std: noise,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_noise_rating_is_rounded_latent() {
        let c = generate_synthetic(&small(1, 0.0)).unwrap();
        for (r, q) in c.records.iter().zip(&c.latent) {
            let expect = q.round().clamp(1.0, 5.0) as u8;
            assert!(r.ratings.iter().all(|x| x.score == expect));
        }
    }

    #[test]
    fn deterministic_bytes() {
        let a = to_jsonl(&generate_synthetic(&small(5, 0.5)).unwrap().records);
        let b = to_jsonl(&generate_synthetic(&small(5, 0.5)).unwrap().records);
        assert_eq!(a, b);
        let c = to_jsonl(&generate_synthetic(&small(6, 0.5)).unwrap().records);
        assert_ne!(a, c);
    }

    #[test]
    fn default_histogram_covers_all_levels() {
        let c = generate_synthetic(&SynthConfig::default()).unwrap();
        let mut hist = [0usize; 5];
        for r in &c.records {
            for x in &r.ratings {
                hist[x.score as usize - 1] += 1;
            }
        }
        assert!(hist.iter().all(|&h| h > 0), "histogram {hist:?}");
    }

    #[test]
    fn zero_noise_preserves_latent_order_within_groups() {
        let c = generate_synthetic(&small(2, 0.0)).unwrap();
        let groups = group_by_image(&c.records, AggregationRule::Mean).unwrap();
        for g in groups {
            for a in &g.items {
                for b in &g.items {
                    if a.latent_q.unwrap() > b.latent_q.unwrap() {
                        assert!(a.gold >= b.gold);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_negative_noise() {
        let cfg = SynthConfig {
            noise_std: -0.1,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn canaries_carry_gold() {
        let cfg = SynthConfig {
            canary_fraction: 0.2,
            ..small(3, 0.5)
        };
        let c = generate_synthetic(&cfg).unwrap();
        assert!(c.records.iter().any(|r| r.is_canary));
        assert!(c.records.iter().all(|r| r.validate().is_ok()));
    }
}
