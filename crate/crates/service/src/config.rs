//! Service configuration: a TOML file, then `MORALE_*` environment
//! overrides, then validation.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! corpus = "corpus.jsonl"
//! checkpoint = "scorer.json"
//! event_log = "events.jsonl"
//! snapshot = "snapshot.json"
//! snapshot_every = 1000
//! delta = 1.0
//! boundary_inclusive = true
//! canary_period = 10
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::EngineError;

pub const ENV_PREFIX: &str = "MORALE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Seed corpus loaded on a fresh start.
    pub corpus: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub event_log: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    /// Compact the log into the snapshot after this many events; 0 never.
    pub snapshot_every: usize,
    pub delta: f64,
    pub boundary_inclusive: bool,
    pub canary_period: usize,
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let e = EngineConfig::default();
        Self {
            bind: "127.0.0.1:8080".into(),
            corpus: None,
            checkpoint: None,
            event_log: None,
            snapshot: None,
            snapshot_every: 1000,
            delta: e.delta,
            boundary_inclusive: e.boundary_inclusive,
            canary_period: e.canary_period,
            seed: e.seed,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, EngineError> {
    value
        .parse()
        .map_err(|_| EngineError::Config(format!("{ENV_PREFIX}{key}: cannot parse `{value}`")))
}

impl ServiceConfig {
    pub fn from_toml(s: &str) -> Result<Self, EngineError> {
        toml::from_str(s).map_err(|e| EngineError::Config(e.to_string()))
    }

    /// Reads the optional file, applies overrides from `env`, validates.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = match path {
            Some(p) => Self::from_toml(
                &std::fs::read_to_string(p)
                    .map_err(|e| EngineError::Config(format!("{}: {e}", p.display())))?,
            )?,
            None => Self::default(),
        };
        cfg.apply_env(env)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `MORALE_<FIELD>` variables. Keys this config does not know
    /// are ignored.
    pub fn apply_env<I>(&mut self, env: I) -> Result<(), EngineError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (k, v) in env {
            let Some(key) = k.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match key {
                "BIND" => self.bind = v,
                "CORPUS" => self.corpus = Some(v.into()),
                "CHECKPOINT" => self.checkpoint = Some(v.into()),
                "EVENT_LOG" => self.event_log = Some(v.into()),
                "SNAPSHOT" => self.snapshot = Some(v.into()),
                "SNAPSHOT_EVERY" => self.snapshot_every = parse(key, &v)?,
                "DELTA" => self.delta = parse(key, &v)?,
                "BOUNDARY_INCLUSIVE" => self.boundary_inclusive = parse(key, &v)?,
                "CANARY_PERIOD" => self.canary_period = parse(key, &v)?,
                "SEED" => self.seed = parse(key, &v)?,
                // Other components share the prefix.
                _ => {}
            }
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            delta: self.delta,
            boundary_inclusive: self.boundary_inclusive,
            canary_period: self.canary_period,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.engine().validate().map_err(EngineError::Config)?;
        if self.bind.trim().is_empty() {
            return Err(EngineError::Config("bind must be non-empty".into()));
        }
        Ok(())
    }
}
