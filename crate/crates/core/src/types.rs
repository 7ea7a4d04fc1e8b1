//! Domain types for traffic logs: interpretations, k-best hypotheses, turns,
//! sessions and turn-level datasets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercases and splits on whitespace. No stemming, no punctuation stripping.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    #[serde(rename = "type")]
    pub slot_type: String,
    pub value: String,
}

impl Slot {
    pub fn new(slot_type: impl Into<String>, value: impl Into<String>) -> Self {
        Self { slot_type: slot_type.into(), value: value.into() }
    }
}

/// A (domain, intent, slots) tuple.
///
/// Slots are kept sorted by slot type, so derived equality and hashing are
/// structural: two interpretations are equal when domain, intent and the slot
/// set agree, whatever order the slots were supplied in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawInterpretation")]
pub struct Interpretation {
    domain: String,
    intent: String,
    slots: Vec<Slot>,
}

#[derive(Deserialize)]
struct RawInterpretation {
    domain: String,
    intent: String,
    #[serde(default)]
    slots: Vec<Slot>,
}

impl TryFrom<RawInterpretation> for Interpretation {
    type Error = Error;

    fn try_from(raw: RawInterpretation) -> Result<Self> {
        Interpretation::new(raw.domain, raw.intent, raw.slots)
    }
}

impl Interpretation {
    pub fn new(domain: impl Into<String>, intent: impl Into<String>, mut slots: Vec<Slot>) -> Result<Self> {
        let domain = domain.into();
        let intent = intent.into();
        if domain.is_empty() || intent.is_empty() {
            return Err(Error::InvalidInterpretation("domain and intent must be non-empty".into()));
        }
        slots.sort();
        if slots.windows(2).any(|w| w[0].slot_type == w[1].slot_type) {
            return Err(Error::InvalidInterpretation(format!(
                "duplicate slot type in {domain}/{intent}"
            )));
        }
        Ok(Self { domain, intent, slots })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot_types(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.slot_type.clone()).collect()
    }

    /// The value-free part of the interpretation: what the models can see.
    pub fn schema(&self) -> Schema {
        Schema {
            domain: self.domain.clone(),
            intent: self.intent.clone(),
            slot_types: self.slot_types(),
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.domain, self.intent)?;
        if !self.slots.is_empty() {
            let slots: Vec<String> = self.slots.iter().map(|s| format!("{}={}", s.slot_type, s.value)).collect();
            write!(f, "[{}]", slots.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Schema {
    pub domain: String,
    pub intent: String,
    pub slot_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub interpretation: Interpretation,
    pub confidence: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSignals {
    pub response_text: String,
    pub barged_in: bool,
    pub terminated_early: bool,
}

/// One user request. `oracle_interpretation` is simulator ground truth and
/// must never reach a feature extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: String,
    pub session_id: String,
    #[serde(default)]
    pub user_id: String,
    pub timestamp: i64,
    pub utterance: Vec<String>,
    #[serde(with = "hypothesis_list")]
    pub hypotheses: Vec<Hypothesis>,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    #[serde(default)]
    pub response: ResponseSignals,
    #[serde(default)]
    pub defect_label: Option<bool>,
    #[serde(default)]
    pub rephrase_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_interpretation: Option<Interpretation>,
}

impl Turn {
    pub fn top(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }

    pub fn top_interpretation(&self) -> &Interpretation {
        &self.hypotheses[0].interpretation
    }

    pub fn is_defect(&self) -> bool {
        self.defect_label == Some(true)
    }

    pub fn is_rephrase(&self) -> bool {
        self.rephrase_of.is_some()
    }

    pub fn utterance_text(&self) -> String {
        self.utterance.join(" ")
    }

    pub fn oracle(&self) -> Result<&Interpretation> {
        self.oracle_interpretation
            .as_ref()
            .ok_or_else(|| Error::MissingOracle(self.turn_id.clone()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidTurn { turn_id: self.turn_id.clone(), reason });
        if self.turn_id.is_empty() {
            return fail("empty turn id".into());
        }
        if self.hypotheses.is_empty() {
            return fail("no hypotheses".into());
        }
        for (i, h) in self.hypotheses.iter().enumerate() {
            if h.rank != i {
                return fail(format!("hypothesis {i} carries rank {}", h.rank));
            }
            if !(0.0..=1.0).contains(&h.confidence) {
                return fail(format!("confidence {} outside [0, 1]", h.confidence));
            }
        }
        if self.hypotheses.windows(2).any(|w| w[1].confidence > w[0].confidence) {
            return fail("confidences increase with rank".into());
        }
        if self.rephrase_of.as_deref() == Some(self.turn_id.as_str()) {
            return fail("turn is marked as a rephrase of itself".into());
        }
        Ok(())
    }
}

/// Wire form of the k-best list: rank is implicit in array order.
mod hypothesis_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{Hypothesis, Interpretation, Slot};

    #[derive(Serialize, Deserialize)]
    struct Record {
        domain: String,
        intent: String,
        #[serde(default)]
        slots: Vec<Slot>,
        confidence: f64,
    }

    pub fn serialize<S: Serializer>(hyps: &[Hypothesis], s: S) -> Result<S::Ok, S::Error> {
        let records: Vec<Record> = hyps
            .iter()
            .map(|h| Record {
                domain: h.interpretation.domain().to_string(),
                intent: h.interpretation.intent().to_string(),
                slots: h.interpretation.slots().to_vec(),
                confidence: h.confidence,
            })
            .collect();
        records.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Hypothesis>, D::Error> {
        let records = Vec::<Record>::deserialize(d)?;
        records
            .into_iter()
            .enumerate()
            .map(|(rank, r)| {
                let interpretation =
                    Interpretation::new(r.domain, r.intent, r.slots).map_err(serde::de::Error::custom)?;
                Ok(Hypothesis { interpretation, confidence: r.confidence, rank })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub turns: Vec<Turn>,
}

impl Session {
    pub fn validate(&self, session_gap_ms: i64) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidSession { session_id: self.session_id.clone(), reason });
        let mut seen = HashSet::new();
        for (i, t) in self.turns.iter().enumerate() {
            t.validate()?;
            if t.session_id != self.session_id {
                return fail(format!("turn `{}` carries session `{}`", t.turn_id, t.session_id));
            }
            if i > 0 {
                let gap = t.timestamp - self.turns[i - 1].timestamp;
                if gap <= 0 {
                    return fail(format!("timestamps not strictly increasing at `{}`", t.turn_id));
                }
                if gap > session_gap_ms {
                    return fail(format!("gap of {gap} ms before `{}`", t.turn_id));
                }
            }
            if let Some(prev) = &t.rephrase_of {
                if !seen.contains(prev.as_str()) {
                    return fail(format!("`{}` rephrases `{prev}`, which is not earlier in the session", t.turn_id));
                }
            }
            seen.insert(t.turn_id.as_str());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Live,
    TrainSplit,
    ValidSplit,
    TargetDefects,
    Curated,
}

/// Turn-level view of a set of sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<Turn>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<Turn>, provenance: Provenance) -> Self {
        Self { records, provenance }
    }

    pub fn from_sessions(sessions: &[Session]) -> Self {
        let records = sessions.iter().flat_map(|s| s.turns.iter().cloned()).collect();
        Self { records, provenance: Provenance::Live }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn defects(&self) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|t| t.is_defect()).cloned().collect(),
            provenance: self.provenance,
        }
    }

    pub fn turn_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|t| t.turn_id.as_str()).collect()
    }
}

/// Interpretations observed in training traffic, sampled uniformly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterpretationCatalog {
    entries: Vec<Interpretation>,
}

impl InterpretationCatalog {
    pub fn from_turns<'a>(turns: impl IntoIterator<Item = &'a Turn>) -> Self {
        let set: BTreeSet<&Interpretation> =
            turns.into_iter().flat_map(|t| t.hypotheses.iter().map(|h| &h.interpretation)).collect();
        Self { entries: set.into_iter().cloned().collect() }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = Interpretation>) -> Self {
        let set: BTreeSet<Interpretation> = entries.into_iter().collect();
        Self { entries: set.into_iter().collect() }
    }

    pub fn entries(&self) -> &[Interpretation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, p: &Interpretation) -> bool {
        self.entries.binary_search(p).is_ok()
    }
}
