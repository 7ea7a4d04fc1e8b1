//! Defect correction: (defect, non-defective rephrase) pairs become
//! noise-augmented pairwise training data for a (turn, candidate) scorer that
//! picks the best interpretation from a turn's own k-best list.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{candidate_features, dim_features, pair_features};
use crate::nn::{Dims, Model, RawFeatures, TrainConfig};
use crate::seed::{self, derive_seed};
use crate::types::{Interpretation, InterpretationCatalog, Session, Turn};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_Q: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighValuePair {
    pub defect_turn: Turn,
    pub rephrase_turn: Turn,
}

/// Every (defect, non-defective rephrase of it) pair, in session order.
pub fn extract_high_value_pairs(sessions: &[Session]) -> Vec<HighValuePair> {
    let mut out = Vec::new();
    for s in sessions {
        let by_id: HashMap<&str, &Turn> = s.turns.iter().map(|t| (t.turn_id.as_str(), t)).collect();
        for r in &s.turns {
            let Some(parent) = r.rephrase_of.as_deref().and_then(|id| by_id.get(id)) else { continue };
            if parent.defect_label == Some(true) && r.defect_label == Some(false) {
                out.push(HighValuePair { defect_turn: (*parent).clone(), rephrase_turn: r.clone() });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// The rephrase's top-1.
    Positive,
    /// Another member of the rephrase's k-best.
    KBest,
    /// Drawn from the catalog.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcmInstance {
    pub defect_turn_id: String,
    pub candidate: Interpretation,
    pub source: CandidateSource,
    pub label: bool,
    pub turn_features: RawFeatures,
    pub candidate_features: RawFeatures,
}

impl DcmInstance {
    pub fn features(&self) -> RawFeatures {
        let mut f = self.turn_features.clone();
        f.extend(self.candidate_features.clone());
        f
    }
}

/// Per pair: the rephrase's top-1 as the positive, the other members of its
/// first `k` hypotheses as negatives, and up to `q` catalog interpretations
/// as noise negatives. Noise is drawn uniformly without replacement from the
/// catalog entries whose schema (domain, intent, slot types) differs from
/// every member of the rephrase's k-best, using a generator seeded from
/// `seed` and the defect turn id.
pub fn generate_dcm_training_data(
    pairs: &[HighValuePair],
    k: usize,
    q: usize,
    catalog: &InterpretationCatalog,
    seed: u64,
) -> Result<Vec<DcmInstance>> {
    if k == 0 {
        return Err(Error::Config("dcm k must be at least 1".into()));
    }
    if q > 0 && catalog.is_empty() {
        return Err(Error::Config("interpretation catalog is empty".into()));
    }
    let mut out = Vec::with_capacity(pairs.len() * (k + q));
    for pair in pairs {
        let r = &pair.rephrase_turn;
        if r.hypotheses.is_empty() {
            return Err(Error::InvalidTurn { turn_id: r.turn_id.clone(), reason: "no hypotheses".into() });
        }
        let turn_features = dim_features(&pair.defect_turn);
        let make = |candidate: &Interpretation, source: CandidateSource| DcmInstance {
            defect_turn_id: pair.defect_turn.turn_id.clone(),
            candidate: candidate.clone(),
            source,
            label: source == CandidateSource::Positive,
            turn_features: turn_features.clone(),
            candidate_features: candidate_features(candidate),
        };
        let kbest: Vec<&Interpretation> = r.hypotheses.iter().take(k).map(|h| &h.interpretation).collect();
        out.push(make(kbest[0], CandidateSource::Positive));
        for p in &kbest[1..] {
            out.push(make(p, CandidateSource::KBest));
        }
        if q == 0 {
            continue;
        }
        let taken: BTreeSet<_> = kbest.iter().map(|p| p.schema()).collect();
        let pool: Vec<&Interpretation> = catalog.entries().iter().filter(|p| !taken.contains(&p.schema())).collect();
        if pool.len() < q {
            log::warn!(
                "pair {}: only {} noise candidates available, wanted {q}",
                pair.defect_turn.turn_id,
                pool.len()
            );
        }
        let mut rng = seed::rng(derive_seed(seed, &pair.defect_turn.turn_id));
        for p in pool.choose_multiple(&mut rng, q.min(pool.len())) {
            out.push(make(p, CandidateSource::Noise));
        }
    }
    Ok(out)
}

pub fn train_dcm(instances: &[DcmInstance], cfg: &TrainConfig, dims: &Dims, seed: u64) -> Result<Model> {
    let samples: Vec<(RawFeatures, bool)> = instances.iter().map(|i| (i.features(), i.label)).collect();
    Model::fit(&samples, dims, cfg, seed)
}

pub fn score(model: &Model, t: &Turn, p: &Interpretation) -> Result<f64> {
    model.score(&pair_features(t, p))
}

/// Index of the highest score; the earliest index wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// The candidate of `t`'s own k-best with the highest score, ties going to
/// the lower baseline rank.
pub fn correct(t: &Turn, model: &Model) -> Result<Interpretation> {
    let scores = t.hypotheses.iter().map(|h| score(model, t, &h.interpretation)).collect::<Result<Vec<_>>>()?;
    let best = argmax_first(&scores)
        .ok_or_else(|| Error::InvalidTurn { turn_id: t.turn_id.clone(), reason: "no hypotheses".into() })?;
    Ok(t.hypotheses[best].interpretation.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Hypothesis, ResponseSignals, Slot};

    fn interp(d: &str, i: &str, slot: Option<(&str, &str)>) -> Interpretation {
        Interpretation::new(d, i, slot.map(|(t, v)| vec![Slot::new(t, v)]).unwrap_or_default()).unwrap()
    }

    fn turn(id: &str, ts: i64, hyps: Vec<Interpretation>, defect: bool, rephrase_of: Option<&str>) -> Turn {
        let n = hyps.len();
        Turn {
            turn_id: id.into(),
            session_id: "s".into(),
            user_id: "u".into(),
            timestamp: ts,
            utterance: vec!["play".into(), "thriller".into()],
            hypotheses: hyps
                .into_iter()
                .enumerate()
                .map(|(rank, interpretation)| Hypothesis { interpretation, confidence: 1.0 - rank as f64 / n as f64, rank })
                .collect(),
            context: Default::default(),
            response: ResponseSignals::default(),
            defect_label: Some(defect),
            rephrase_of: rephrase_of.map(str::to_string),
            oracle_interpretation: None,
        }
    }

    fn five() -> Vec<Interpretation> {
        vec![
            interp("Music", "PlaySong", Some(("Song", "thriller"))),
            interp("Video", "PlayMovie", Some(("Movie", "thriller"))),
            interp("Music", "PlayArtist", Some(("Artist", "thriller"))),
            interp("Music", "AddToPlaylist", Some(("Song", "thriller"))),
            interp("Video", "PlayShow", Some(("Show", "thriller"))),
        ]
    }

    fn session(turns: Vec<Turn>) -> Session {
        Session { session_id: "s".into(), user_id: "u".into(), turns }
    }

    fn catalog() -> InterpretationCatalog {
        let mut entries = five();
        entries.push(interp("Weather", "GetForecast", Some(("City", "paris"))));
        entries.push(interp("Weather", "GetForecast", Some(("City", "rome"))));
        entries.push(interp("Timer", "SetTimer", Some(("Duration", "one hour"))));
        entries.push(interp("General", "Greet", None));
        entries.push(interp("Music", "PlaySong", Some(("Song", "frozen"))));
        InterpretationCatalog::from_entries(entries)
    }

    #[test]
    fn defect_then_good_rephrase_is_one_pair() {
        let s = session(vec![turn("a", 0, five(), true, None), turn("b", 5, five(), false, Some("a"))]);
        let pairs = extract_high_value_pairs(&[s]);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].defect_turn.turn_id.as_str(), pairs[0].rephrase_turn.turn_id.as_str()), ("a", "b"));
    }

    #[test]
    fn defective_rephrase_gives_no_pair() {
        let s = session(vec![turn("a", 0, five(), true, None), turn("b", 5, five(), true, Some("a"))]);
        assert!(extract_high_value_pairs(&[s]).is_empty());
    }

    #[test]
    fn chains_pair_only_adjacent_links() {
        let s = session(vec![
            turn("t1", 0, five(), true, None),
            turn("t2", 5, five(), true, Some("t1")),
            turn("t3", 9, five(), false, Some("t2")),
        ]);
        let pairs = extract_high_value_pairs(&[s]);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].defect_turn.turn_id.as_str(), pairs[0].rephrase_turn.turn_id.as_str()), ("t2", "t3"));
        for p in &pairs {
            assert!(p.defect_turn.is_defect() && !p.rephrase_turn.is_defect());
            assert_eq!(p.rephrase_turn.rephrase_of.as_deref(), Some(p.defect_turn.turn_id.as_str()));
        }
    }

    fn pair() -> HighValuePair {
        let mut defect_hyps = five();
        defect_hyps.swap(0, 1);
        HighValuePair { defect_turn: turn("a", 0, defect_hyps, true, None), rephrase_turn: turn("b", 5, five(), false, Some("a")) }
    }

    #[test]
    fn full_list_yields_one_positive_and_seven_negatives() {
        let inst = generate_dcm_training_data(&[pair()], 5, 3, &catalog(), 1).unwrap();
        assert_eq!(inst.len(), 8);
        assert_eq!(inst.iter().filter(|i| i.label).count(), 1);
        assert_eq!(inst[0].candidate, five()[0]);
        let kbest: BTreeSet<_> = five().iter().map(Interpretation::schema).collect();
        for i in inst.iter().filter(|i| i.source == CandidateSource::Noise) {
            assert!(!kbest.contains(&i.candidate.schema()), "{}", i.candidate);
        }
    }

    #[test]
    fn q_zero_is_the_base_scheme() {
        let inst = generate_dcm_training_data(&[pair()], 5, 0, &InterpretationCatalog::default(), 1).unwrap();
        assert_eq!(inst.len(), 5);
        assert_eq!(inst.iter().filter(|i| i.label).count(), 1);
    }

    #[test]
    fn small_catalog_gives_fewer_noise_negatives() {
        let inst = generate_dcm_training_data(&[pair()], 5, 50, &catalog(), 1).unwrap();
        // four schemas outside the k-best, five entries
        assert_eq!(inst.iter().filter(|i| i.source == CandidateSource::Noise).count(), 4);
    }

    #[test]
    fn generation_is_order_independent() {
        let mut b = pair();
        b.defect_turn.turn_id = "c".into();
        b.rephrase_turn.rephrase_of = Some("c".into());
        let one = generate_dcm_training_data(&[pair(), b.clone()], 5, 2, &catalog(), 9).unwrap();
        let two = generate_dcm_training_data(&[b, pair()], 5, 2, &catalog(), 9).unwrap();
        let key = |v: &[DcmInstance]| {
            let mut k: Vec<String> = v.iter().map(|i| serde_json::to_string(i).unwrap()).collect();
            k.sort();
            k
        };
        assert_eq!(key(&one), key(&two));
    }

    #[test]
    fn argmax_breaks_ties_toward_lower_rank() {
        assert_eq!(argmax_first(&[0.2, 0.9, 0.9]), Some(1));
        assert_eq!(argmax_first(&[0.5]), Some(0));
        assert_eq!(argmax_first(&[]), None);
    }
}
