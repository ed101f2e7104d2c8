#![allow(dead_code)]

use std::sync::Arc;

use morale_core::data::ScenarioRecord;
use morale_service::{Engine, EngineConfig, ManualClock, ModelScorer, Service};

pub fn corpus(n: usize, canaries: usize) -> Vec<ScenarioRecord> {
    let mut v: Vec<ScenarioRecord> = (0..n)
        .map(|i| {
            ScenarioRecord::new(
                format!("sc{i:03}"),
                format!("img{}", i / 3),
                format!("https://img.example/{}.jpg", i / 3),
                format!("scenario number {i}"),
            )
        })
        .collect();
    for i in 0..canaries {
        let mut r = ScenarioRecord::new(format!("q{i}"), format!("qimg{i}"), format!("https://img.example/q{i}.jpg"), "a canary scenario");
        r.is_canary = true;
        r.canary_gold = Some(1);
        v.push(r);
    }
    v
}

pub fn service(records: Vec<ScenarioRecord>, period: usize, scorer: impl ModelScorer + 'static) -> Service {
    let cfg = EngineConfig {
        canary_period: period,
        ..EngineConfig::default()
    };
    Service::new(
        Engine::new(cfg, records).unwrap(),
        Arc::new(scorer),
        Arc::new(ManualClock::new(1_000, 7)),
    )
}
