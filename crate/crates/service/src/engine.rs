//! The discrepancy loop as a pure state machine.
//!
//! Every mutation is first planned against the current state, which yields
//! either an immediate reply or an [`Event`]. Committed events are the only
//! way state changes, so replaying the log rebuilds the same store.

use std::collections::{BTreeMap, HashMap, VecDeque};

use morale_core::data::{Modality, ModalityLabel, Rating, ScenarioRecord};
use morale_core::hash::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::scorer::ModelScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Branch {
    ConfirmAndPrompt,
    ModalityCheck,
}

/// Agreement when `delta <= threshold` (or `<` with an exclusive boundary).
pub fn branch_for(delta: f64, threshold: f64, inclusive: bool) -> Branch {
    let agree = if inclusive {
        delta <= threshold
    } else {
        delta < threshold
    };
    if agree {
        Branch::ConfirmAndPrompt
    } else {
        Branch::ModalityCheck
    }
}

/// What an annotator sees. Canaries use the same shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub scenario_id: String,
    pub image_id: String,
    pub image_ref: String,
    pub text: String,
}

impl Task {
    fn from_record(r: &ScenarioRecord) -> Self {
        Self {
            scenario_id: r.scenario_id.clone(),
            image_id: r.image_id.clone(),
            image_ref: r.image_ref.clone(),
            text: r.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopEvent {
    pub scenario_id: String,
    pub s_user: u8,
    pub s_vlm: f64,
    pub delta: f64,
    pub branch: Branch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_scenario_id: Option<String>,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedTask {
    pub scenario_id: String,
    pub s_vlm: f64,
    pub served_at: u64,
    pub judged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub annotator_id: String,
    pub consent_given: bool,
    pub consent_at: Option<u64>,
    pub delta: f64,
    pub boundary_inclusive: bool,
    pub queue: VecDeque<String>,
    pub current: Option<ServedTask>,
    pub pending_modality: Option<String>,
    /// Image the annotator may propose a scenario for.
    pub prompt_image: Option<String>,
    pub events: Vec<LoopEvent>,
    pub last_ts: u64,
}

/// Client-facing session summary. Never carries model scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub annotator_id: String,
    pub consent_given: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consent_at: Option<u64>,
    pub delta: f64,
    pub remaining: usize,
    pub judged: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_modality: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_image: Option<String>,
}

impl Session {
    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            annotator_id: self.annotator_id.clone(),
            consent_given: self.consent_given,
            consent_at: self.consent_at,
            delta: self.delta,
            remaining: self.queue.len(),
            judged: self.events.len(),
            pending_modality: self.pending_modality.clone(),
            prompt_image: self.prompt_image.clone(),
        }
    }
}

/// Corpus records in insertion order with an id index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ScenarioRecord>", into = "Vec<ScenarioRecord>")]
pub struct Store {
    records: Vec<ScenarioRecord>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<ScenarioRecord>> for Store {
    type Error = String;

    fn try_from(records: Vec<ScenarioRecord>) -> Result<Self, String> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.scenario_id.clone(), i).is_some() {
                return Err(format!("duplicate scenario_id `{}`", r.scenario_id));
            }
        }
        Ok(Self { records, index })
    }
}

impl From<Store> for Vec<ScenarioRecord> {
    fn from(s: Store) -> Self {
        s.records
    }
}

impl Store {
    pub fn records(&self) -> &[ScenarioRecord] {
        &self.records
    }

    pub fn get(&self, scenario_id: &str) -> Option<&ScenarioRecord> {
        self.index.get(scenario_id).map(|&i| &self.records[i])
    }

    fn get_mut(&mut self, scenario_id: &str) -> Option<&mut ScenarioRecord> {
        self.index.get(scenario_id).map(|&i| &mut self.records[i])
    }

    fn push(&mut self, record: ScenarioRecord) {
        self.index
            .insert(record.scenario_id.clone(), self.records.len());
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub delta: f64,
    pub boundary_inclusive: bool,
    /// One canary every `canary_period` tasks; 0 disables injection.
    pub canary_period: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            boundary_inclusive: true,
            canary_period: 10,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(format!("delta must be > 0, got {}", self.delta));
        }
        if self.canary_period == 1 {
            return Err("canary_period must be 0 (off) or >= 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        annotator_id: String,
        consent: bool,
        delta: f64,
        boundary_inclusive: bool,
        queue: Vec<String>,
    },
    TaskServed {
        session_id: String,
        scenario_id: String,
        s_vlm: f64,
    },
    Judged {
        session_id: String,
        scenario_id: String,
        score: u8,
    },
    ModalityLabeled {
        session_id: String,
        scenario_id: String,
        modality: Modality,
    },
    ScenarioProposed {
        session_id: String,
        scenario_id: String,
        image_id: String,
        text: String,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::SessionCreated { session_id, .. }
            | Event::TaskServed { session_id, .. }
            | Event::Judged { session_id, .. }
            | Event::ModalityLabeled { session_id, .. }
            | Event::ScenarioProposed { session_id, .. } => session_id,
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub ts: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NextTask {
    Task { task: Task },
    Done,
    ConsentRequired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentReply {
    pub scenario_id: String,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityReply {
    pub scenario_id: String,
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalReply {
    pub scenario_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Session(SessionView),
    Next(NextTask),
    Judgment(JudgmentReply),
    Modality(ModalityReply),
    Proposal(ProposalReply),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Ready(Reply),
    Commit(Event),
}

/// Everything that survives a restart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub store: Store,
    pub sessions: BTreeMap<String, Session>,
    pub session_counter: u64,
    pub last_seq: u64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub config: EngineConfig,
    state: EngineState,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        seed_corpus: Vec<ScenarioRecord>,
    ) -> Result<Self, EngineError> {
        config.validate().map_err(EngineError::Config)?;
        let store = Store::try_from(seed_corpus).map_err(EngineError::Config)?;
        Ok(Self {
            config,
            state: EngineState {
                store,
                ..EngineState::default()
            },
        })
    }

    pub fn from_state(config: EngineConfig, state: EngineState) -> Result<Self, EngineError> {
        config.validate().map_err(EngineError::Config)?;
        Ok(Self { config, state })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn store(&self) -> &Store {
        &self.state.store
    }

    pub fn session(&self, session_id: &str) -> Result<&Session, EngineError> {
        self.state
            .sessions
            .get(session_id)
            .ok_or_else(|| EngineError::UnknownSession(session_id.to_string()))
    }

    /// Task order for a new session: shuffled regular items with a canary
    /// in every `canary_period`-th slot, cycling through the canary pool.
    pub fn build_queue(&self, session_id: &str) -> Vec<String> {
        let mut regular = Vec::new();
        let mut canaries = Vec::new();
        for r in self.state.store.records() {
            if r.is_canary {
                canaries.push(r.scenario_id.clone());
            } else {
                regular.push(r.scenario_id.clone());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.config.seed,
            &format!("queue/{session_id}"),
        ));
        regular.shuffle(&mut rng);
        canaries.shuffle(&mut rng);

        let period = self.config.canary_period;
        let mut queue = Vec::with_capacity(regular.len() + regular.len() / period.max(1));
        let mut next_canary = 0;
        for id in regular {
            if period > 0 && !canaries.is_empty() && queue.len() % period == period - 1 {
                queue.push(canaries[next_canary % canaries.len()].clone());
                next_canary += 1;
            }
            queue.push(id);
        }
        queue
    }

    pub fn plan_create(&self, annotator_id: &str, consent: bool) -> Result<Plan, EngineError> {
        if annotator_id.trim().is_empty() {
            return Err(EngineError::Validation {
                code: "INVALID_ANNOTATOR",
                message: "annotator_id must be non-empty".into(),
            });
        }
        let session_id = format!("s{:06}", self.state.session_counter + 1);
        let queue = self.build_queue(&session_id);
        Ok(Plan::Commit(Event::SessionCreated {
            session_id,
            annotator_id: annotator_id.to_string(),
            consent,
            delta: self.config.delta,
            boundary_inclusive: self.config.boundary_inclusive,
            queue,
        }))
    }

    pub fn plan_next(
        &self,
        session_id: &str,
        scorer: &dyn ModelScorer,
    ) -> Result<Plan, EngineError> {
        let s = self.session(session_id)?;
        if !s.consent_given {
            return Ok(Plan::Ready(Reply::Next(NextTask::ConsentRequired)));
        }
        if let Some(pending) = &s.pending_modality {
            return Err(EngineError::Conflict {
                code: "MODALITY_PENDING",
                message: format!("modality check pending for `{pending}`"),
            });
        }
        if let Some(cur) = s.current.as_ref().filter(|c| !c.judged) {
            let r = self.record(&cur.scenario_id)?;
            return Ok(Plan::Ready(Reply::Next(NextTask::Task {
                task: Task::from_record(r),
            })));
        }
        let Some(next) = s.queue.front() else {
            return Ok(Plan::Ready(Reply::Next(NextTask::Done)));
        };
        let r = self.record(next)?;
        let raw = scorer.score(r).map_err(EngineError::Scorer)?;
        if !raw.is_finite() {
            return Err(EngineError::Scorer(format!(
                "non-finite model score for `{next}`"
            )));
        }
        Ok(Plan::Commit(Event::TaskServed {
            session_id: session_id.to_string(),
            scenario_id: next.clone(),
            s_vlm: raw.clamp(1.0, 5.0),
        }))
    }

    pub fn plan_judgment(
        &self,
        session_id: &str,
        scenario_id: &str,
        score: i64,
    ) -> Result<Plan, EngineError> {
        let s = self.session(session_id)?;
        if !(1..=5).contains(&score) {
            return Err(EngineError::Validation {
                code: "INVALID_SCORE",
                message: format!("score must be an integer in 1..=5, got {score}"),
            });
        }
        require_consent(s)?;
        match &s.current {
            Some(cur) if cur.scenario_id == scenario_id && cur.judged => {
                Err(EngineError::Conflict {
                    code: "DUPLICATE_JUDGMENT",
                    message: format!("`{scenario_id}` already judged"),
                })
            }
            Some(cur) if cur.scenario_id == scenario_id => Ok(Plan::Commit(Event::Judged {
                session_id: session_id.to_string(),
                scenario_id: scenario_id.to_string(),
                score: score as u8,
            })),
            _ => Err(EngineError::Conflict {
                code: "NOT_SERVED",
                message: format!("`{scenario_id}` is not the task in flight"),
            }),
        }
    }

    pub fn plan_modality(
        &self,
        session_id: &str,
        scenario_id: &str,
        modality: &str,
    ) -> Result<Plan, EngineError> {
        let s = self.session(session_id)?;
        let modality = parse_modality(modality)?;
        match &s.pending_modality {
            Some(p) if p == scenario_id => Ok(Plan::Commit(Event::ModalityLabeled {
                session_id: session_id.to_string(),
                scenario_id: scenario_id.to_string(),
                modality,
            })),
            _ => Err(EngineError::Conflict {
                code: "NO_PENDING_CHECK",
                message: format!("no modality check pending for `{scenario_id}`"),
            }),
        }
    }

    pub fn plan_scenario(
        &self,
        session_id: &str,
        image_id: &str,
        text: &str,
    ) -> Result<Plan, EngineError> {
        let s = self.session(session_id)?;
        if text.trim().is_empty() {
            return Err(EngineError::Validation {
                code: "EMPTY_TEXT",
                message: "scenario text must contain non-whitespace characters".into(),
            });
        }
        match &s.prompt_image {
            None => Err(EngineError::Conflict {
                code: "NO_PROMPT",
                message: "no confirmed task is open for a proposal".into(),
            }),
            Some(img) if img != image_id => Err(EngineError::Conflict {
                code: "WRONG_IMAGE",
                message: format!("proposal must use image `{img}`, got `{image_id}`"),
            }),
            Some(_) => {
                let mut n = self
                    .state
                    .store
                    .records()
                    .iter()
                    .filter(|r| r.proposed_by.is_some())
                    .count()
                    + 1;
                let mut id = format!("{image_id}-p{n}");
                while self.state.store.get(&id).is_some() {
                    n += 1;
                    id = format!("{image_id}-p{n}");
                }
                Ok(Plan::Commit(Event::ScenarioProposed {
                    session_id: session_id.to_string(),
                    scenario_id: id,
                    image_id: image_id.to_string(),
                    text: text.trim().to_string(),
                }))
            }
        }
    }

    /// Wraps an event with the next sequence number and a timestamp that
    /// never runs backwards within its session.
    pub fn entry(&self, event: Event, now: u64) -> LogEntry {
        let floor = self
            .state
            .sessions
            .get(event.session_id())
            .map_or(0, |s| s.last_ts);
        LogEntry {
            seq: self.state.last_seq + 1,
            ts: now.max(floor),
            event,
        }
    }

    /// Applies a committed entry. Entries produced by the planners always
    /// apply; anything else is reported as a corrupt log.
    pub fn apply(&mut self, entry: &LogEntry) -> Result<Reply, EngineError> {
        if entry.seq != self.state.last_seq + 1 {
            return Err(EngineError::Corrupt(format!(
                "expected seq {}, found {}",
                self.state.last_seq + 1,
                entry.seq
            )));
        }
        let ts = entry.ts;
        let reply = match &entry.event {
            Event::SessionCreated {
                session_id,
                annotator_id,
                consent,
                delta,
                boundary_inclusive,
                queue,
            } => {
                let s = Session {
                    session_id: session_id.clone(),
                    annotator_id: annotator_id.clone(),
                    consent_given: *consent,
                    consent_at: consent.then_some(ts),
                    delta: *delta,
                    boundary_inclusive: *boundary_inclusive,
                    queue: queue.iter().cloned().collect(),
                    current: None,
                    pending_modality: None,
                    prompt_image: None,
                    events: Vec::new(),
                    last_ts: ts,
                };
                let view = s.view();
                if self.state.sessions.insert(session_id.clone(), s).is_some() {
                    return Err(corrupt(format!("session `{session_id}` created twice")));
                }
                self.state.session_counter += 1;
                Reply::Session(view)
            }
            Event::TaskServed {
                session_id,
                scenario_id,
                s_vlm,
            } => {
                let task = Task::from_record(
                    self.state
                        .store
                        .get(scenario_id)
                        .ok_or_else(|| corrupt(format!("unknown scenario `{scenario_id}`")))?,
                );
                let s = self.session_mut(session_id)?;
                if s.queue.front() != Some(scenario_id) {
                    return Err(corrupt(format!("`{scenario_id}` is not at the queue head")));
                }
                s.queue.pop_front();
                s.current = Some(ServedTask {
                    scenario_id: scenario_id.clone(),
                    s_vlm: *s_vlm,
                    served_at: ts,
                    judged: false,
                });
                s.prompt_image = None;
                s.last_ts = ts;
                Reply::Next(NextTask::Task { task })
            }
            Event::Judged {
                session_id,
                scenario_id,
                score,
            } => {
                let image_id = self
                    .state
                    .store
                    .get(scenario_id)
                    .ok_or_else(|| corrupt(format!("unknown scenario `{scenario_id}`")))?
                    .image_id
                    .clone();
                let s = self.session_mut(session_id)?;
                let cur = s
                    .current
                    .as_mut()
                    .filter(|c| c.scenario_id == *scenario_id && !c.judged)
                    .ok_or_else(|| corrupt(format!("judgment for unserved `{scenario_id}`")))?;
                cur.judged = true;
                let s_vlm = cur.s_vlm;
                let delta = (f64::from(*score) - s_vlm).abs();
                let branch = branch_for(delta, s.delta, s.boundary_inclusive);
                match branch {
                    Branch::ConfirmAndPrompt => s.prompt_image = Some(image_id),
                    Branch::ModalityCheck => s.pending_modality = Some(scenario_id.clone()),
                }
                s.events.push(LoopEvent {
                    scenario_id: scenario_id.clone(),
                    s_user: *score,
                    s_vlm,
                    delta,
                    branch,
                    modality: None,
                    proposed_scenario_id: None,
                    timestamp: ts,
                });
                s.last_ts = ts;
                let annotator_id = s.annotator_id.clone();
                self.record_mut(scenario_id)?.ratings.push(Rating {
                    annotator_id,
                    score: *score,
                });
                Reply::Judgment(JudgmentReply {
                    scenario_id: scenario_id.clone(),
                    branch,
                })
            }
            Event::ModalityLabeled {
                session_id,
                scenario_id,
                modality,
            } => {
                let s = self.session_mut(session_id)?;
                if s.pending_modality.as_deref() != Some(scenario_id) {
                    return Err(corrupt(format!("no pending check for `{scenario_id}`")));
                }
                s.pending_modality = None;
                if let Some(ev) = s
                    .events
                    .iter_mut()
                    .rev()
                    .find(|e| e.scenario_id == *scenario_id)
                {
                    ev.modality = Some(*modality);
                }
                s.last_ts = ts;
                let annotator_id = s.annotator_id.clone();
                self.record_mut(scenario_id)?
                    .modality_labels
                    .push(ModalityLabel {
                        annotator_id,
                        modality: *modality,
                    });
                Reply::Modality(ModalityReply {
                    scenario_id: scenario_id.clone(),
                    modality: *modality,
                })
            }
            Event::ScenarioProposed {
                session_id,
                scenario_id,
                image_id,
                text,
            } => {
                if self.state.store.get(scenario_id).is_some() {
                    return Err(corrupt(format!("scenario `{scenario_id}` already exists")));
                }
                let s = self.session_mut(session_id)?;
                if s.prompt_image.as_deref() != Some(image_id) {
                    return Err(corrupt(format!("no prompt open for image `{image_id}`")));
                }
                s.prompt_image = None;
                let confirmed = s.current.as_ref().map(|c| c.scenario_id.clone());
                if let Some(ev) = s.events.last_mut() {
                    ev.proposed_scenario_id = Some(scenario_id.clone());
                }
                s.last_ts = ts;
                let annotator_id = s.annotator_id.clone();
                let image_ref = confirmed
                    .and_then(|c| self.state.store.get(&c).map(|r| r.image_ref.clone()))
                    .unwrap_or_default();
                let mut record = ScenarioRecord::new(scenario_id, image_id, image_ref, text);
                record.proposed_by = Some(annotator_id);
                self.state.store.push(record);
                Reply::Proposal(ProposalReply {
                    scenario_id: scenario_id.clone(),
                })
            }
        };
        self.state.last_seq = entry.seq;
        Ok(reply)
    }

    fn record(&self, scenario_id: &str) -> Result<&ScenarioRecord, EngineError> {
        self.state.store.get(scenario_id).ok_or_else(|| {
            EngineError::Internal(format!("queued scenario `{scenario_id}` missing"))
        })
    }

    fn record_mut(&mut self, scenario_id: &str) -> Result<&mut ScenarioRecord, EngineError> {
        self.state
            .store
            .get_mut(scenario_id)
            .ok_or_else(|| corrupt(format!("unknown scenario `{scenario_id}`")))
    }

    fn session_mut(&mut self, session_id: &str) -> Result<&mut Session, EngineError> {
        self.state
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| corrupt(format!("unknown session `{session_id}`")))
    }
}

fn corrupt(message: String) -> EngineError {
    EngineError::Corrupt(message)
}

fn require_consent(s: &Session) -> Result<(), EngineError> {
    if s.consent_given {
        Ok(())
    } else {
        Err(EngineError::Conflict {
            code: "CONSENT_REQUIRED",
            message: "session has no consent".into(),
        })
    }
}

pub fn parse_modality(s: &str) -> Result<Modality, EngineError> {
    match s.to_ascii_lowercase().as_str() {
        "text" => Ok(Modality::Text),
        "image" => Ok(Modality::Image),
        "both" => Ok(Modality::Both),
        _ => Err(EngineError::Validation {
            code: "INVALID_MODALITY",
            message: format!("modality must be text, image or both, got `{s}`"),
        }),
    }
}
