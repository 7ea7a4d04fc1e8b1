//! Feature profiles shared by the three models. None of them reads a turn's
//! response signals or its oracle interpretation.

use crate::nn::{Dims, RawFeatures};
use crate::types::{Hypothesis, Interpretation, Turn};

pub const UTTERANCE: &str = "utterance";
pub const SLOT_TYPES: &str = "slot_types";
pub const DOMAIN: &str = "domain";
pub const INTENT: &str = "intent";
pub const CONTEXT: &str = "context";
pub const TOP_CONFIDENCE: &str = "top_confidence";
pub const CONFIDENCE_MARGIN: &str = "confidence_margin";
pub const HYPOTHESIS_COUNT: &str = "hypothesis_count";
pub const CAND_DOMAIN: &str = "cand_domain";
pub const CAND_INTENT: &str = "cand_intent";
pub const CAND_SLOT_TYPES: &str = "cand_slot_types";
pub const CAND_RANK: &str = "cand_rank";
pub const CAND_CONFIDENCE: &str = "cand_confidence";

/// Turn-level profile: utterance, top hypothesis and context metadata.
pub fn dim_features(t: &Turn) -> RawFeatures {
    let mut r = RawFeatures::default();
    let top = t.top();
    r.sequential.insert(UTTERANCE.into(), t.utterance.clone());
    r.sequential.insert(SLOT_TYPES.into(), top.interpretation.slot_types());
    r.categorical.insert(DOMAIN.into(), top.interpretation.domain().into());
    r.categorical.insert(INTENT.into(), top.interpretation.intent().into());
    let context: Vec<String> = t.context.iter().map(|(k, v)| format!("{k}={v}")).collect();
    r.categorical.insert(CONTEXT.into(), context.join(";"));
    let second = t.hypotheses.get(1).map_or(0.0, |h| h.confidence);
    r.numerical.insert(TOP_CONFIDENCE.into(), vec![top.confidence]);
    r.numerical.insert(CONFIDENCE_MARGIN.into(), vec![top.confidence - second]);
    r.numerical.insert(HYPOTHESIS_COUNT.into(), vec![t.hypotheses.len() as f64]);
    r
}

/// Candidate interpretation profile.
pub fn candidate_features(p: &Interpretation) -> RawFeatures {
    let mut r = RawFeatures::default();
    r.categorical.insert(CAND_DOMAIN.into(), p.domain().into());
    r.categorical.insert(CAND_INTENT.into(), p.intent().into());
    r.sequential.insert(CAND_SLOT_TYPES.into(), p.slot_types());
    r
}

/// Turn profile plus candidate profile.
pub fn pair_features(t: &Turn, p: &Interpretation) -> RawFeatures {
    let mut r = dim_features(t);
    r.extend(candidate_features(p));
    r
}

/// Pair profile plus the candidate's baseline rank and confidence.
pub fn reranker_features(t: &Turn, h: &Hypothesis) -> RawFeatures {
    let mut r = pair_features(t, &h.interpretation);
    r.numerical.insert(CAND_RANK.into(), vec![h.rank as f64]);
    r.numerical.insert(CAND_CONFIDENCE.into(), vec![h.confidence]);
    r
}

/// Default sizes: slot-type sequences are short, so their LSTMs are narrower.
pub fn default_dims() -> Dims {
    let mut d = Dims::default();
    d.hidden_overrides.insert(SLOT_TYPES.into(), 8);
    d.hidden_overrides.insert(CAND_SLOT_TYPES.into(), 8);
    d
}
