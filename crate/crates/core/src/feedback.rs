//! Rule-based dissatisfaction and rephrase detectors used to label turns with
//! `defect_label` and `rephrase_of`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Session, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    pub rephrase_similarity_threshold: f64,
    pub rephrase_window_turns: usize,
    pub rephrase_window_ms: i64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self { rephrase_similarity_threshold: 0.5, rephrase_window_turns: 5, rephrase_window_ms: 90_000 }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rephrase_similarity_threshold) {
            return Err(Error::Config(format!(
                "feedback.rephrase_similarity_threshold = {} outside [0, 1]",
                self.rephrase_similarity_threshold
            )));
        }
        if self.rephrase_window_turns == 0 || self.rephrase_window_ms <= 0 {
            return Err(Error::Config("feedback rephrase windows must be positive".into()));
        }
        Ok(())
    }
}

/// Barge-in or early termination.
pub fn detect_defect(t: &Turn) -> bool {
    t.response.barged_in || t.response.terminated_early
}

fn token_set(tokens: &[String]) -> BTreeSet<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

pub fn token_jaccard(a: &[String], b: &[String]) -> f64 {
    let (a, b) = (token_set(a), token_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Whether `later` rephrases `earlier`, `turns_apart` positions further on in
/// the same session.
pub fn detect_rephrase(earlier: &Turn, later: &Turn, turns_apart: usize, cfg: &FeedbackConfig) -> Result<bool> {
    if earlier.session_id != later.session_id {
        return Err(Error::CrossSession { earlier: earlier.turn_id.clone(), later: later.turn_id.clone() });
    }
    if earlier.turn_id == later.turn_id || later.timestamp <= earlier.timestamp {
        return Ok(false);
    }
    if turns_apart == 0 || turns_apart > cfg.rephrase_window_turns {
        return Ok(false);
    }
    if later.timestamp - earlier.timestamp > cfg.rephrase_window_ms {
        return Ok(false);
    }
    Ok(token_jaccard(&earlier.utterance, &later.utterance) >= cfg.rephrase_similarity_threshold)
}

/// Labels every turn's defect flag and links each rephrase to its closest
/// qualifying antecedent. Existing labels are recomputed, so the operation is
/// idempotent.
pub fn annotate_sessions(sessions: &[Session], cfg: &FeedbackConfig) -> Result<Vec<Session>> {
    cfg.validate()?;
    sessions.iter().map(|s| annotate_session(s, cfg)).collect()
}

fn annotate_session(session: &Session, cfg: &FeedbackConfig) -> Result<Session> {
    let mut out = session.clone();
    for j in 0..out.turns.len() {
        let mut link = None;
        for i in (j.saturating_sub(cfg.rephrase_window_turns)..j).rev() {
            if detect_rephrase(&session.turns[i], &session.turns[j], j - i, cfg)? {
                link = Some(session.turns[i].turn_id.clone());
                break;
            }
        }
        let t = &mut out.turns[j];
        t.defect_label = Some(detect_defect(t));
        t.rephrase_of = link;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::simgen::{self, Behavior, SimConfig};
    use crate::types::{normalize_tokens, Hypothesis, Interpretation, ResponseSignals};

    fn turn(id: &str, session: &str, ts: i64, text: &str, barged: bool) -> Turn {
        Turn {
            turn_id: id.into(),
            session_id: session.into(),
            user_id: "u".into(),
            timestamp: ts,
            utterance: normalize_tokens(text),
            hypotheses: vec![Hypothesis {
                interpretation: Interpretation::new("Music", "PlaySong", vec![]).unwrap(),
                confidence: 0.9,
                rank: 0,
            }],
            context: Default::default(),
            response: ResponseSignals { response_text: String::new(), barged_in: barged, terminated_early: false },
            defect_label: None,
            rephrase_of: None,
            oracle_interpretation: None,
        }
    }

    #[test]
    fn defect_rule() {
        assert!(detect_defect(&turn("a", "s", 0, "x", true)));
        assert!(!detect_defect(&turn("a", "s", 0, "x", false)));
        let mut t = turn("a", "s", 0, "x", false);
        t.response.terminated_early = true;
        assert!(detect_defect(&t));
    }

    #[test]
    fn jaccard_of_a_worded_out_rephrase() {
        let a = normalize_tokens("play old town road");
        let b = normalize_tokens("play the song old town road");
        assert!((token_jaccard(&a, &b) - 4.0 / 6.0).abs() < 1e-12);
        let cfg = FeedbackConfig::default();
        let (ta, tb) = (turn("a", "s", 0, "play old town road", true), turn("b", "s", 5_000, "play the song old town road", false));
        assert!(detect_rephrase(&ta, &tb, 1, &cfg).unwrap());
    }

    #[test]
    fn identical_utterances_one_turn_apart() {
        let cfg = FeedbackConfig::default();
        let (a, b) = (turn("a", "s", 0, "turn on the fan", true), turn("b", "s", 1000, "turn on the fan", false));
        assert!(detect_rephrase(&a, &b, 1, &cfg).unwrap());
    }

    #[test]
    fn far_apart_pairs_are_not_rephrases() {
        let cfg = FeedbackConfig::default();
        let (a, b) = (turn("a", "s", 0, "turn on the fan", true), turn("b", "s", 1000, "turn on the fan", false));
        assert!(!detect_rephrase(&a, &b, 50, &cfg).unwrap());
        let c = turn("c", "s", 500_000, "turn on the fan", false);
        assert!(!detect_rephrase(&a, &c, 1, &cfg).unwrap());
    }

    #[test]
    fn cross_session_pair_is_a_contract_violation() {
        let cfg = FeedbackConfig::default();
        let (a, b) = (turn("a", "s1", 0, "x", true), turn("b", "s2", 1000, "x", false));
        assert!(matches!(detect_rephrase(&a, &b, 1, &cfg), Err(Error::CrossSession { .. })));
    }

    #[test]
    fn barge_in_then_near_duplicate() {
        let s = Session {
            session_id: "s".into(),
            user_id: "u".into(),
            turns: vec![
                turn("a", "s", 0, "play old town road", true),
                turn("b", "s", 6_000, "play the song old town road", false),
            ],
        };
        let out = annotate_sessions(&[s], &FeedbackConfig::default()).unwrap();
        assert_eq!(out[0].turns[0].defect_label, Some(true));
        assert_eq!(out[0].turns[0].rephrase_of, None);
        assert_eq!(out[0].turns[1].defect_label, Some(false));
        assert_eq!(out[0].turns[1].rephrase_of.as_deref(), Some("a"));
    }

    #[test]
    fn closest_antecedent_wins() {
        let s = Session {
            session_id: "s".into(),
            user_id: "u".into(),
            turns: vec![
                turn("a", "s", 0, "turn on the fan", true),
                turn("b", "s", 5_000, "turn on the fan", true),
                turn("c", "s", 9_000, "turn on the fan", false),
            ],
        };
        let out = annotate_sessions(&[s], &FeedbackConfig::default()).unwrap();
        assert_eq!(out[0].turns[1].rephrase_of.as_deref(), Some("a"));
        assert_eq!(out[0].turns[2].rephrase_of.as_deref(), Some("b"));
    }

    #[test]
    fn satisfied_session_has_no_labels_and_annotation_is_idempotent() {
        let s = Session {
            session_id: "s".into(),
            user_id: "u".into(),
            turns: vec![turn("a", "s", 0, "play thriller", false), turn("b", "s", 60_000, "set a timer for one hour", false)],
        };
        let cfg = FeedbackConfig::default();
        let once = annotate_sessions(&[s], &cfg).unwrap();
        assert!(once[0].turns.iter().all(|t| t.defect_label == Some(false) && t.rephrase_of.is_none()));
        let twice = annotate_sessions(&once, &cfg).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn recovers_simulated_rephrases() {
        let cfg = SimConfig {
            seed: 31,
            n_sessions: 1500,
            behavior: Behavior { barge_in_prob_on_error: 1.0, rephrase_prob_after_defect: 1.0, random_defect_noise_prob: 0.0 },
            ..SimConfig::default()
        };
        let out = simgen::simulate(&cfg).unwrap();
        let annotated = annotate_sessions(&out.sessions, &FeedbackConfig::default()).unwrap();
        let truth: HashSet<(String, String)> = out.rephrase_pairs.into_iter().collect();
        let found: HashSet<(String, String)> = annotated
            .iter()
            .flat_map(|s| &s.turns)
            .filter_map(|t| t.rephrase_of.clone().map(|p| (p, t.turn_id.clone())))
            .collect();
        let hits = truth.intersection(&found).count() as f64;
        let precision = hits / found.len() as f64;
        let recall = hits / truth.len() as f64;
        assert!(truth.len() > 100);
        assert!(precision >= 0.95 && recall >= 0.95, "precision {precision}, recall {recall}");

        // with beta = 1 and eta = 0 the defects are exactly the misread turns
        for t in annotated.iter().flat_map(|s| &s.turns) {
            let misread = t.top_interpretation() != t.oracle().unwrap();
            assert_eq!(t.is_defect(), misread, "{}", t.turn_id);
        }
    }

    #[test]
    fn rephrase_links_point_strictly_backwards_within_the_session() {
        let sessions = simgen::generate_traffic(&SimConfig { seed: 2, n_sessions: 300, ..SimConfig::default() }).unwrap();
        let annotated = annotate_sessions(&sessions, &FeedbackConfig::default()).unwrap();
        for s in &annotated {
            s.validate(crate::sessions::DEFAULT_SESSION_GAP_MS).unwrap();
        }
    }
}
