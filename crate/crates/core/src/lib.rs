//! Few-shot relation classification benchmark toolkit: corpus ingestion,
//! frequency-based splits, entity marking, pair and episode sampling,
//! encoders and evaluation.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod par;
pub mod provenance;
pub mod renderer;
pub mod report;
pub mod sampler;
pub mod splitter;
pub mod synth;

pub use error::{Error, Result};
