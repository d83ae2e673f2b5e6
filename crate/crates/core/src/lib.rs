//! Core-pruning experiment pipeline for implicit-feedback recommendation
//! datasets.
//!
//! The crate covers the full path from raw interaction logs to comparison
//! tables: ingestion ([`ingest`]), canonical log representation ([`log`]),
//! user-threshold core filtering ([`corefilter`]), dataset characterisation
//! ([`characteristics`]), two-phase train/test construction ([`split`]),
//! baseline recommenders ([`recommend`]), ranking metrics ([`eval`]), grid
//! orchestration ([`grid`]) and report emission ([`report`]).
//!
//! Every randomised stage draws from a seed stream derived in [`seed`];
//! given equal inputs and an equal [`PipelineConfig`], reruns are
//! byte-identical.

pub mod atomic;
pub mod characteristics;
pub mod config;
pub mod corefilter;
pub mod error;
pub mod eval;
pub mod grid;
pub mod ingest;
pub mod log;
pub mod recommend;
pub mod report;
pub mod seed;
pub mod split;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use log::InteractionLog;
