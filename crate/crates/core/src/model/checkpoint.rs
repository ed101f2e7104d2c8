use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochStats, ScorerParams, TrainConfig};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "morale-scorer";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: shapes, every parameter tensor, the training config and
/// the SHA-256 of the corpus bytes the model was trained from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub params: ScorerParams,
    pub config: TrainConfig,
    pub corpus_sha256: String,
    #[serde(default)]
    pub history: Vec<EpochStats>,
}

impl Checkpoint {
    pub fn new(
        params: ScorerParams,
        config: TrainConfig,
        corpus_sha256: String,
        history: Vec<EpochStats>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            params,
            config,
            corpus_sha256,
            history,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.params.check_shapes()?;
        if ck.params.input_dim != 2 * ck.config.feature_dim {
            return Err(Error::Checkpoint(format!(
                "input_dim {} does not match feature_dim {}",
                ck.params.input_dim, ck.config.feature_dim
            )));
        }
        if !ck.params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// CSV `epoch,mean_loss`.
    pub fn loss_csv(history: &[EpochStats]) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for h in history {
            s.push_str(&format!("{},{}\n", h.epoch, h.mean_loss));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let cfg = TrainConfig {
            feature_dim: 4,
            hidden: 3,
            ..TrainConfig::default()
        };
        let p = ScorerParams::init(8, 3, 42, 3.0);
        let ck = Checkpoint::new(p, cfg, "abc".into(), vec![]);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(ck, back);
    }

    #[test]
    fn rejects_bad_shapes() {
        let cfg = TrainConfig {
            feature_dim: 4,
            hidden: 3,
            ..TrainConfig::default()
        };
        let mut p = ScorerParams::init(8, 3, 42, 3.0);
        p.w2.pop();
        let json = Checkpoint::new(p, cfg, String::new(), vec![]).to_json().unwrap();
        assert!(Checkpoint::from_json(&json).is_err());
    }

    #[test]
    fn csv_layout() {
        let h = vec![EpochStats { epoch: 1, mean_loss: 0.5, steps: 3 }];
        assert_eq!(Checkpoint::loss_csv(&h), "epoch,mean_loss\n1,0.5\n");
    }
}
