//! Quality control for crowdsourced speech transcription.
//!
//! The crate implements a two-stage pipeline. Confidence estimation (CEM)
//! predicts, per submitted transcript, how many word errors it contains and
//! gates bad submissions for relabeling. Error correction (ECM) fuses the
//! surviving transcripts of each clip by confidence-weighted voting over a
//! progressively built word lattice.
//!
//! Modules roughly follow the data path: [`corpus`] loads and normalizes
//! crowd transcripts, [`metrics`] scores them (TWER), [`ctc`] aligns words
//! against acoustic emissions, [`snr`] estimates audio quality, [`confidence`]
//! trains the word and utterance confidence models on top of [`gbm`],
//! [`fusion`] merges transcripts, and [`pipeline`] ties everything together
//! behind a config. [`synth`] generates a corpus with the same shape as the
//! real crowdsourcing release for tests and demos.

pub mod confidence;
pub mod corpus;
pub mod ctc;
pub mod error;
pub mod fusion;
pub mod gbm;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod snr;
pub mod synth;

pub use error::{Error, Result};
