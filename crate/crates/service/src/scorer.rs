use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use morale_core::data::ScenarioRecord;
use morale_core::features::Featurizer;
use morale_core::model::{Checkpoint, LossType, ScorerParams};

/// Model score for a scenario on the 1-5 scale. The engine clamps it.
pub trait ModelScorer: Send + Sync {
    fn score(&self, record: &ScenarioRecord) -> Result<f64, String>;
}

/// Same score for everything.
#[derive(Debug, Clone, Copy)]
pub struct FixedScorer(pub f64);

impl ModelScorer for FixedScorer {
    fn score(&self, _: &ScenarioRecord) -> Result<f64, String> {
        Ok(self.0)
    }
}

impl<F> ModelScorer for F
where
    F: Fn(&ScenarioRecord) -> f64 + Send + Sync,
{
    fn score(&self, record: &ScenarioRecord) -> Result<f64, String> {
        Ok(self(record))
    }
}

/// Trained scorer loaded from a checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointScorer {
    params: ScorerParams,
    featurizer: Featurizer,
    loss: LossType,
}

impl CheckpointScorer {
    pub fn new(checkpoint: Checkpoint) -> Self {
        Self {
            featurizer: Featurizer::new(checkpoint.config.feature_dim),
            loss: checkpoint.config.loss,
            params: checkpoint.params,
        }
    }

    pub fn load(path: &Path) -> morale_core::Result<Self> {
        Ok(Self::new(Checkpoint::load(path)?))
    }
}

impl ModelScorer for CheckpointScorer {
    fn score(&self, record: &ScenarioRecord) -> Result<f64, String> {
        let x = self
            .featurizer
            .features(&record.image_id, &record.text)
            .map_err(|e| e.to_string())?;
        let raw = self.params.score(&x).map_err(|e| e.to_string())?;
        Ok(self.loss.report_score(raw))
    }
}

/// Milliseconds since the epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// Test clock advancing by a fixed step on every read.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: AtomicU64,
    step: u64,
}

impl ManualClock {
    pub fn new(start: u64, step: u64) -> Self {
        Self {
            now: AtomicU64::new(start),
            step,
        }
    }

    pub fn set(&self, t: u64) {
        self.now.store(t, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.now.fetch_add(self.step, Ordering::SeqCst)
    }
}
