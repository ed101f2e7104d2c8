//! Listwise scalar preference alignment toolkit.
//!
//! Corpus handling ([`data`]), hashed features ([`features`]), the scalar
//! scorer and its objectives ([`model`]), evaluation metrics ([`metrics`]),
//! annotator statistics ([`agreement`]) and end-to-end runs
//! ([`experiment`]).

pub mod agreement;
pub mod data;
mod error;
pub mod exec;
pub mod experiment;
pub mod features;
pub mod hash;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
pub use exec::Exec;
