//! Annotation service for the discrepancy-guided rating loop.
//!
//! A session walks a shuffled queue of scenarios with canaries mixed in.
//! Each served task is scored by the model up front; the score stays on the
//! server. When the annotator's rating lands within `delta` of it they are
//! asked for a new scenario on the same image, otherwise for the modality
//! their judgment rests on.

pub mod api;
pub mod config;
pub mod engine;
mod error;
pub mod scorer;
pub mod server;
pub mod service;
pub mod storage;

pub use config::ServiceConfig;
pub use engine::{Branch, Engine, EngineConfig, NextTask, Task};
pub use error::EngineError;
pub use scorer::{CheckpointScorer, Clock, FixedScorer, ManualClock, ModelScorer, SystemClock};
pub use service::Service;
