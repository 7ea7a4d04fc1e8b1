//! Curating NLU supervision data from implicit user feedback.
//!
//! The crate mines dissatisfaction (barge-ins) and rephrases from dialog
//! session logs, trains a defect identification model and a defect correction
//! model on those surrogate labels, assembles a curated dataset and trains a
//! final re-ranker over the baseline NLU's k-best list. A deterministic traffic
//! simulator with oracle interpretations stands in for production traffic.

pub mod dcm;
pub mod dim;
pub mod error;
pub mod features;
pub mod feedback;
pub mod logio;
pub mod nn;
pub mod pipeline;
pub mod rerank;
pub mod seed;
pub mod sessions;
pub mod simgen;
pub mod types;

pub use error::{Error, Result};
pub use types::{Dataset, Hypothesis, Interpretation, InterpretationCatalog, Provenance, ResponseSignals, Session, Slot, Turn};
