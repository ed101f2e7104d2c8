mod common;

use std::path::Path;
use std::sync::Arc;

use morale_core::data::{parse_corpus_str, to_jsonl, ScenarioRecord};
use morale_core::hash::fnv1a64;
use morale_service::engine::Branch;
use morale_service::{ManualClock, Service, ServiceConfig};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Create { annotator: u8, consent: bool },
    Next { session: u8 },
    Judge { session: u8, score: u8 },
    Modality { session: u8, which: u8 },
    Propose { session: u8, text: String },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        1 => (0u8..3, prop::bool::weighted(0.85)).prop_map(|(annotator, consent)| Op::Create { annotator, consent }),
        4 => (0u8..4).prop_map(|session| Op::Next { session }),
        4 => (0u8..4, 0u8..7).prop_map(|(session, score)| Op::Judge { session, score }),
        2 => (0u8..4, 0u8..4).prop_map(|(session, which)| Op::Modality { session, which }),
        2 => (0u8..4, "[a-z ]{0,12}").prop_map(|(session, text)| Op::Propose { session, text }),
    ]
}

/// Scores depend only on the scenario, so they are stable across restarts.
fn hashed_score(r: &ScenarioRecord) -> f64 {
    1.0 + (fnv1a64(&r.scenario_id) % 9) as f64 * 0.5
}

/// Applies ops, ignoring rejected ones; rejections must not change state.
fn drive(svc: &Service, ops: &[Op]) {
    let sessions = |svc: &Service| svc.state().sessions.keys().cloned().collect::<Vec<_>>();
    for op in ops {
        let before = svc.state();
        let ids = sessions(svc);
        let pick = |i: u8| ids.get(i as usize % ids.len().max(1)).cloned();
        let result = match op {
            Op::Create { annotator, consent } => svc.create_session(&format!("ann{annotator}"), *consent).map(|_| ()),
            Op::Next { session } => match pick(*session) {
                Some(sid) => svc.next_task(&sid).map(|_| ()),
                None => continue,
            },
            Op::Judge { session, score } => match pick(*session) {
                Some(sid) => {
                    let cur = before.sessions[&sid].current.as_ref().map(|c| c.scenario_id.clone());
                    svc.submit_judgment(&sid, &cur.unwrap_or_else(|| "sc000".into()), i64::from(*score))
                        .map(|_| ())
                }
                None => continue,
            },
            Op::Modality { session, which } => match pick(*session) {
                Some(sid) => {
                    let pending = before.sessions[&sid].pending_modality.clone().unwrap_or_default();
                    let m = ["text", "image", "both", "audio"][*which as usize];
                    svc.submit_modality(&sid, &pending, m).map(|_| ())
                }
                None => continue,
            },
            Op::Propose { session, text } => match pick(*session) {
                Some(sid) => {
                    let img = before.sessions[&sid].prompt_image.clone().unwrap_or_else(|| "img0".into());
                    svc.submit_scenario(&sid, &img, text).map(|_| ())
                }
                None => continue,
            },
        };
        if result.is_err() {
            assert_eq!(svc.state(), before, "{op:?} failed but changed state");
        }
    }
}

fn config(dir: &Path, corpus: &Path, snapshot_every: usize, with_snapshot: bool) -> ServiceConfig {
    ServiceConfig {
        corpus: Some(corpus.to_path_buf()),
        event_log: Some(dir.join("events.jsonl")),
        snapshot: with_snapshot.then(|| dir.join("snapshot.json")),
        snapshot_every,
        canary_period: 4,
        ..ServiceConfig::default()
    }
}

fn open(cfg: &ServiceConfig) -> Service {
    Service::open(cfg, Arc::new(hashed_score), Arc::new(ManualClock::new(10, 3))).unwrap()
}

fn seed_corpus(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("corpus.jsonl");
    std::fs::write(&p, to_jsonl(&common::corpus(9, 2))).unwrap();
    p
}

fn check_invariants(svc: &Service) {
    let state = svc.state();
    for s in state.sessions.values() {
        let mut last = 0;
        for e in &s.events {
            assert_eq!(e.delta <= s.delta, e.branch == Branch::ConfirmAndPrompt, "{e:?}");
            assert_eq!(e.delta, (f64::from(e.s_user) - e.s_vlm).abs());
            assert!(e.timestamp >= last);
            last = e.timestamp;
            if e.modality.is_some() {
                assert_eq!(e.branch, Branch::ModalityCheck);
            }
            if e.proposed_scenario_id.is_some() {
                assert_eq!(e.branch, Branch::ConfirmAndPrompt);
            }
        }
    }
    for r in state.store.records() {
        assert!(r.modality_labels.len() <= r.ratings.len());
        for l in &r.modality_labels {
            assert!(r.ratings.iter().any(|x| x.annotator_id == l.annotator_id), "orphan label on {}", r.scenario_id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_rebuilds_identical_store(ops in prop::collection::vec(op(), 0..120)) {
        let dir = tempfile::tempdir().unwrap();
        let corpus = seed_corpus(dir.path());
        let cfg = config(dir.path(), &corpus, 0, false);
        let (state, export) = {
            let svc = open(&cfg);
            drive(&svc, &ops);
            check_invariants(&svc);
            (svc.state(), svc.export_jsonl())
        };
        // Dropped without shutdown, as after a crash.
        let again = open(&cfg);
        prop_assert_eq!(again.state(), state);
        prop_assert_eq!(again.export_jsonl(), export);
    }

    #[test]
    fn snapshots_and_log_tail_rebuild_state(ops in prop::collection::vec(op(), 0..120), every in 1usize..15) {
        let dir = tempfile::tempdir().unwrap();
        let corpus = seed_corpus(dir.path());
        let cfg = config(dir.path(), &corpus, every, true);
        let state = {
            let svc = open(&cfg);
            drive(&svc, &ops);
            svc.state()
        };
        prop_assert_eq!(open(&cfg).state(), state);
    }

    #[test]
    fn export_then_import_is_identity(ops in prop::collection::vec(op(), 0..120)) {
        let svc = common::service(common::corpus(9, 2), 4, hashed_score);
        drive(&svc, &ops);
        let text = svc.export_jsonl();
        let back = parse_corpus_str(&text).unwrap();
        prop_assert_eq!(&back, &svc.records());
        prop_assert_eq!(to_jsonl(&back), text);
    }
}

#[test]
fn three_judgments_export_three_rated_records() {
    let svc = common::service(common::corpus(5, 0), 0, |_: &ScenarioRecord| 3.0);
    let sid = svc.create_session("a", true).unwrap().session_id;
    for _ in 0..3 {
        let morale_service::NextTask::Task { task } = svc.next_task(&sid).unwrap() else { panic!() };
        svc.submit_judgment(&sid, &task.scenario_id, 3).unwrap();
    }
    let rated: Vec<_> = parse_corpus_str(&svc.export_jsonl())
        .unwrap()
        .into_iter()
        .filter(|r| !r.ratings.is_empty())
        .collect();
    assert_eq!(rated.len(), 3);
    assert!(rated.iter().all(|r| r.ratings.len() == 1));
}

#[test]
fn torn_final_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = seed_corpus(dir.path());
    let cfg = config(dir.path(), &corpus, 0, false);
    let state = {
        let svc = open(&cfg);
        let sid = svc.create_session("a", true).unwrap().session_id;
        svc.next_task(&sid).unwrap();
        svc.state()
    };
    let log = cfg.event_log.clone().unwrap();
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"seq\":3,\"ts\":");
    std::fs::write(&log, text).unwrap();
    assert_eq!(open(&cfg).state(), state);
}

#[test]
fn corrupt_middle_line_fails_startup() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = seed_corpus(dir.path());
    let cfg = config(dir.path(), &corpus, 0, false);
    {
        let svc = open(&cfg);
        svc.create_session("a", true).unwrap();
        svc.create_session("b", true).unwrap();
    }
    let log = cfg.event_log.clone().unwrap();
    let text = std::fs::read_to_string(&log).unwrap().replacen("session_created", "bogus", 1);
    std::fs::write(&log, text).unwrap();
    assert!(Service::open(&cfg, Arc::new(hashed_score), Arc::new(ManualClock::default())).is_err());
}

#[test]
fn shutdown_snapshot_truncates_log() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = seed_corpus(dir.path());
    let cfg = config(dir.path(), &corpus, 0, true);
    let state = {
        let svc = open(&cfg);
        svc.create_session("a", true).unwrap();
        svc.shutdown().unwrap();
        svc.state()
    };
    assert_eq!(std::fs::read_to_string(cfg.event_log.as_ref().unwrap()).unwrap(), "");
    assert_eq!(open(&cfg).state(), state);
}

#[test]
fn missing_checkpoint_is_a_startup_error() {
    let cfg = ServiceConfig {
        checkpoint: Some("/nonexistent/ck.json".into()),
        ..ServiceConfig::default()
    };
    assert!(Service::from_config(&cfg).is_err());
    assert!(Service::from_config(&ServiceConfig::default()).is_err());
}
