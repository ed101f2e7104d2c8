use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use morale_core::data::{parse_corpus, to_jsonl, ScenarioRecord};

use crate::config::ServiceConfig;
use crate::engine::{
    Engine, EngineState, JudgmentReply, ModalityReply, NextTask, Plan, ProposalReply, Reply,
    SessionView,
};
use crate::error::EngineError;
use crate::scorer::{CheckpointScorer, Clock, ModelScorer, SystemClock};
use crate::storage::{read_log, read_snapshot, write_snapshot, EventLog};

struct Inner {
    engine: Engine,
    log: Option<EventLog>,
    since_snapshot: usize,
}

/// The engine behind one lock. Every mutation is planned, appended to the
/// log, then applied, so the log is the single writer's record.
pub struct Service {
    inner: Mutex<Inner>,
    scorer: Arc<dyn ModelScorer>,
    clock: Arc<dyn Clock>,
    snapshot: Option<PathBuf>,
    snapshot_every: usize,
}

impl Service {
    /// In-memory service with no persistence.
    pub fn new(engine: Engine, scorer: Arc<dyn ModelScorer>, clock: Arc<dyn Clock>) -> Self {
        Self {
            inner: Mutex::new(Inner {
                engine,
                log: None,
                since_snapshot: 0,
            }),
            scorer,
            clock,
            snapshot: None,
            snapshot_every: 0,
        }
    }

    /// Restores from the snapshot (or the seed corpus), replays the event
    /// log on top, and keeps appending to it.
    pub fn open(
        config: &ServiceConfig,
        scorer: Arc<dyn ModelScorer>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let engine_cfg = config.engine();
        let restored = match &config.snapshot {
            Some(p) => read_snapshot(p)?,
            None => None,
        };
        let mut engine = match restored {
            Some(state) => Engine::from_state(engine_cfg, state)?,
            None => {
                let seed = match &config.corpus {
                    Some(p) => {
                        let f = std::fs::File::open(p).map_err(|e| {
                            EngineError::Config(format!("corpus {}: {e}", p.display()))
                        })?;
                        parse_corpus(std::io::BufReader::new(f)).map_err(|e| {
                            EngineError::Config(format!("corpus {}: {e}", p.display()))
                        })?
                    }
                    None => Vec::new(),
                };
                Engine::new(engine_cfg, seed)?
            }
        };
        let log = match &config.event_log {
            Some(p) => {
                let mut replayed = 0;
                for entry in read_log(p)? {
                    if entry.seq <= engine.state().last_seq {
                        continue;
                    }
                    engine.apply(&entry)?;
                    replayed += 1;
                }
                if replayed > 0 {
                    log::info!("replayed {replayed} events from {}", p.display());
                }
                Some(EventLog::open(p)?)
            }
            None => None,
        };
        Ok(Self {
            inner: Mutex::new(Inner {
                engine,
                log,
                since_snapshot: 0,
            }),
            scorer,
            clock,
            snapshot: config.snapshot.clone(),
            snapshot_every: config.snapshot_every,
        })
    }

    /// Production wiring: checkpoint scorer and wall clock.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, EngineError> {
        let path = config
            .checkpoint
            .as_ref()
            .ok_or_else(|| EngineError::Config("checkpoint path is required".into()))?;
        let scorer = CheckpointScorer::load(path)
            .map_err(|e| EngineError::Config(format!("checkpoint {}: {e}", path.display())))?;
        Self::open(config, Arc::new(scorer), Arc::new(SystemClock))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn execute<F>(&self, plan: F) -> Result<Reply, EngineError>
    where
        F: FnOnce(&Engine, &dyn ModelScorer) -> Result<Plan, EngineError>,
    {
        let mut inner = self.lock();
        let event = match plan(&inner.engine, self.scorer.as_ref())? {
            Plan::Ready(r) => return Ok(r),
            Plan::Commit(ev) => ev,
        };
        let entry = inner.engine.entry(event, self.clock.now_ms());
        if let Some(log) = inner.log.as_mut() {
            log.append(&entry)?;
        }
        let reply = inner.engine.apply(&entry)?;
        inner.since_snapshot += 1;
        if self.snapshot_every > 0 && inner.since_snapshot >= self.snapshot_every {
            self.compact(&mut inner)?;
        }
        Ok(reply)
    }

    fn compact(&self, inner: &mut Inner) -> Result<(), EngineError> {
        let Some(path) = &self.snapshot else {
            return Ok(());
        };
        write_snapshot(path, inner.engine.state())?;
        if let Some(log) = inner.log.as_mut() {
            log.truncate()?;
        }
        inner.since_snapshot = 0;
        Ok(())
    }

    pub fn create_session(
        &self,
        annotator_id: &str,
        consent: bool,
    ) -> Result<SessionView, EngineError> {
        match self.execute(|e, _| e.plan_create(annotator_id, consent))? {
            Reply::Session(v) => Ok(v),
            r => Err(unexpected(r)),
        }
    }

    pub fn session(&self, session_id: &str) -> Result<SessionView, EngineError> {
        Ok(self.lock().engine.session(session_id)?.view())
    }

    pub fn next_task(&self, session_id: &str) -> Result<NextTask, EngineError> {
        match self.execute(|e, s| e.plan_next(session_id, s))? {
            Reply::Next(n) => Ok(n),
            r => Err(unexpected(r)),
        }
    }

    pub fn submit_judgment(
        &self,
        session_id: &str,
        scenario_id: &str,
        score: i64,
    ) -> Result<JudgmentReply, EngineError> {
        match self.execute(|e, _| e.plan_judgment(session_id, scenario_id, score))? {
            Reply::Judgment(j) => Ok(j),
            r => Err(unexpected(r)),
        }
    }

    pub fn submit_modality(
        &self,
        session_id: &str,
        scenario_id: &str,
        modality: &str,
    ) -> Result<ModalityReply, EngineError> {
        match self.execute(|e, _| e.plan_modality(session_id, scenario_id, modality))? {
            Reply::Modality(m) => Ok(m),
            r => Err(unexpected(r)),
        }
    }

    pub fn submit_scenario(
        &self,
        session_id: &str,
        image_id: &str,
        text: &str,
    ) -> Result<ProposalReply, EngineError> {
        match self.execute(|e, _| e.plan_scenario(session_id, image_id, text))? {
            Reply::Proposal(p) => Ok(p),
            r => Err(unexpected(r)),
        }
    }

    pub fn records(&self) -> Vec<ScenarioRecord> {
        self.lock().engine.store().records().to_vec()
    }

    pub fn export_jsonl(&self) -> String {
        to_jsonl(self.lock().engine.store().records())
    }

    pub fn state(&self) -> EngineState {
        self.lock().engine.state().clone()
    }

    /// Flushes the log and, when configured, writes a final snapshot.
    pub fn shutdown(&self) -> Result<(), EngineError> {
        let mut inner = self.lock();
        if let Some(log) = inner.log.as_mut() {
            log.sync()?;
        }
        if self.snapshot.is_some() {
            self.compact(&mut inner)?;
        }
        Ok(())
    }
}

fn unexpected(r: Reply) -> EngineError {
    EngineError::Internal(format!("unexpected reply {r:?}"))
}
