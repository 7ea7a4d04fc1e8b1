//! Defect identification: a turn-level classifier trained on the surrogate
//! defect labels, a bisection search for its decision threshold, target
//! selection, and the naive grouping baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::dim_features;
use crate::nn::{Dims, Model, RawFeatures, TrainConfig};
use crate::seed::derive_seed;
use crate::sessions::split_dataset;
use crate::types::{Dataset, Provenance, Turn};

pub const DEFAULT_LAMBDA: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Same as [`dim_features`].
pub fn build_dim_features(t: &Turn) -> RawFeatures {
    dim_features(t)
}

fn require_labels(d: &Dataset) -> Result<()> {
    match d.records.iter().find(|t| t.defect_label.is_none()) {
        Some(t) => Err(Error::InvalidTurn { turn_id: t.turn_id.clone(), reason: "turn is not annotated".into() }),
        None => Ok(()),
    }
}

/// Splits `d_live` 9:1 by session, trains on the larger part and returns the
/// model with the held-out validation set.
pub fn train_dim(d_live: &Dataset, cfg: &TrainConfig, dims: &Dims, seed: u64) -> Result<(Model, Dataset)> {
    require_labels(d_live)?;
    let (train, valid) = split_dataset(d_live, (9, 1), derive_seed(seed, "dim-split"))?;
    if !train.records.iter().any(Turn::is_defect) {
        return Err(Error::NoDefects);
    }
    let samples: Vec<(RawFeatures, bool)> = train.records.iter().map(|t| (dim_features(t), t.is_defect())).collect();
    let model = Model::fit(&samples, dims, cfg, derive_seed(seed, "dim-train"))?;
    Ok((model, valid))
}

pub fn score(model: &Model, t: &Turn) -> Result<f64> {
    model.score(&dim_features(t))
}

pub fn score_all(model: &Model, turns: &[Turn]) -> Result<Vec<f64>> {
    turns.iter().map(|t| score(model, t)).collect()
}

/// Fraction of real defects in a predicted set; 0 for the empty set.
pub fn prediction_accuracy<'a>(pred: impl IntoIterator<Item = &'a Turn>) -> f64 {
    let (mut n, mut hits) = (0usize, 0usize);
    for t in pred {
        n += 1;
        hits += usize::from(t.is_defect());
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresSearchResult {
    pub tau: f64,
    /// Prediction accuracy of `{score > tau}`.
    pub achieved_accuracy: f64,
    pub iterations: usize,
    pub lambda: f64,
    pub epsilon: f64,
    /// The midpoint probed by the final iteration.
    pub last_probe: f64,
    /// Size of `{score > tau}`.
    pub selected: usize,
    /// Smallest grid threshold (step epsilon/10) whose accuracy reaches
    /// lambda, for comparison; `None` when no grid point does.
    pub sweep_tau: Option<f64>,
}

pub fn iteration_bound(epsilon: f64) -> usize {
    (1.0 / epsilon).log2().ceil() as usize + 1
}

fn accuracy_above(scored: &[(f64, bool)], tau: f64) -> (f64, usize) {
    let (mut n, mut hits) = (0usize, 0usize);
    for &(s, y) in scored {
        if s > tau {
            n += 1;
            hits += usize::from(y);
        }
    }
    (if n == 0 { 0.0 } else { hits as f64 / n as f64 }, n)
}

/// Smallest `tau` on the grid `0, step, 2 step, ..` up to 1 whose selected set
/// reaches `lambda`.
pub fn sweep_threshold(scored: &[(f64, bool)], lambda: f64, step: f64) -> Option<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).find(|&tau| accuracy_above(scored, tau).0 >= lambda)
}

/// Bisection over `(score, is_defect)` pairs. Each probe `tau = (low + up) / 2`
/// raises `low` when the accuracy of `{score > tau}` falls short of `lambda`
/// and lowers `up` otherwise, until the interval is no wider than `epsilon`.
///
/// Returns `up`, the smallest probe that met `lambda`, when any did; otherwise
/// the last probe.
pub fn thres_search_scores(scored: &[(f64, bool)], lambda: f64, epsilon: f64) -> Result<ThresSearchResult> {
    if !(lambda > 0.0 && lambda < 1.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("lambda {lambda} and epsilon {epsilon} must lie in (0, 1)")));
    }
    let (mut low, mut up) = (0.0_f64, 1.0_f64);
    let mut tau = 0.5;
    let mut passed = false;
    let mut iterations = 0;
    while (low - up).abs() > epsilon {
        tau = (low + up) / 2.0;
        let (alpha, _) = accuracy_above(scored, tau);
        if alpha < lambda {
            low = tau;
        } else {
            up = tau;
            passed = true;
        }
        iterations += 1;
    }
    let chosen = if passed { up } else { tau };
    let (achieved_accuracy, selected) = accuracy_above(scored, chosen);
    Ok(ThresSearchResult {
        tau: chosen,
        achieved_accuracy,
        iterations,
        lambda,
        epsilon,
        last_probe: tau,
        selected,
        sweep_tau: sweep_threshold(scored, lambda, epsilon / 10.0),
    })
}

/// Scores `d_valid` with the model and runs the threshold search.
pub fn thres_search(model: &Model, d_valid: &Dataset, lambda: f64, epsilon: f64) -> Result<ThresSearchResult> {
    require_labels(d_valid)?;
    let scored = d_valid
        .records
        .iter()
        .map(|t| Ok((score(model, t)?, t.is_defect())))
        .collect::<Result<Vec<_>>>()?;
    thres_search_scores(&scored, lambda, epsilon)
}

/// Turns of `d` scoring strictly above `tau`.
pub fn select_targets(model: &Model, d: &Dataset, tau: f64) -> Result<Dataset> {
    let scores = score_all(model, &d.records)?;
    Ok(select_by_scores(d, &scores, tau))
}

pub fn select_by_scores(d: &Dataset, scores: &[f64], tau: f64) -> Dataset {
    let records = d.records.iter().zip(scores).filter(|(_, &s)| s > tau).map(|(t, _)| t.clone()).collect();
    Dataset::new(records, Provenance::TargetDefects)
}

/// Groups turns by exact match on the named features (categorical values or
/// whole sequences) and keeps every turn of groups whose defect ratio exceeds
/// `ratio_threshold`.
pub fn naive_group_baseline(d_live: &Dataset, signal_keys: &[&str], ratio_threshold: f64) -> Result<Dataset> {
    require_labels(d_live)?;
    let key_of = |t: &Turn| -> Result<Vec<String>> {
        let f = dim_features(t);
        signal_keys
            .iter()
            .map(|k| {
                if let Some(v) = f.categorical.get(*k) {
                    Ok(v.clone())
                } else if let Some(v) = f.sequential.get(*k) {
                    Ok(v.join(" "))
                } else {
                    Err(Error::Config(format!("unknown signal key `{k}`")))
                }
            })
            .collect()
    };
    let mut groups: BTreeMap<Vec<String>, (usize, usize)> = BTreeMap::new();
    let mut keys = Vec::with_capacity(d_live.len());
    for t in &d_live.records {
        let k = key_of(t)?;
        let e = groups.entry(k.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(t.is_defect());
        keys.push(k);
    }
    let records = d_live
        .records
        .iter()
        .zip(&keys)
        .filter(|(_, k)| {
            let (n, d) = groups[*k];
            d as f64 / n as f64 > ratio_threshold
        })
        .map(|(t, _)| t.clone())
        .collect();
    Ok(Dataset::new(records, Provenance::TargetDefects))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::types::{Hypothesis, Interpretation, ResponseSignals, Slot};

    fn turn(id: usize, domain: &str, intent: &str, slot: Option<&str>, defect: bool) -> Turn {
        let slots = slot.map(|s| vec![Slot::new(s, "x")]).unwrap_or_default();
        Turn {
            turn_id: format!("t{id}"),
            session_id: format!("s{id}"),
            user_id: "u".into(),
            timestamp: id as i64,
            utterance: vec!["play".into(), "x".into()],
            hypotheses: vec![Hypothesis {
                interpretation: Interpretation::new(domain, intent, slots).unwrap(),
                confidence: 0.9,
                rank: 0,
            }],
            context: Default::default(),
            response: ResponseSignals::default(),
            defect_label: Some(defect),
            rephrase_of: None,
            oracle_interpretation: None,
        }
    }

    fn labels(flags: &[bool]) -> Vec<Turn> {
        flags.iter().enumerate().map(|(i, &d)| turn(i, "Music", "PlaySong", None, d)).collect()
    }

    #[test]
    fn prediction_accuracy_counts_defects() {
        let mut flags = vec![true; 9];
        flags.push(false);
        assert!((prediction_accuracy(&labels(&flags)) - 0.9).abs() < 1e-12);
        assert_eq!(prediction_accuracy(&labels(&[true; 4])), 1.0);
        assert_eq!(prediction_accuracy(&Vec::<Turn>::new()), 0.0);
    }

    #[test]
    fn prediction_accuracy_matches_a_recount() {
        let mut rng = crate::seed::rng(3);
        let flags: Vec<bool> = (0..200).map(|_| rand::Rng::gen_bool(&mut rng, 0.3)).collect();
        let recount = flags.iter().filter(|f| **f).count() as f64 / 200.0;
        assert_eq!(prediction_accuracy(&labels(&flags)), recount);
    }

    #[test]
    fn epsilon_one_percent_takes_seven_iterations() {
        let scored: Vec<(f64, bool)> = (0..100).map(|i| (i as f64 / 100.0, i >= 50)).collect();
        let r = thres_search_scores(&scored, 0.9, 0.01).unwrap();
        assert_eq!(r.iterations, 7);
        assert!(r.iterations <= iteration_bound(0.01));
        assert_eq!(iteration_bound(0.01), 8);
    }

    #[test]
    fn all_defects_drive_tau_toward_zero() {
        let scored: Vec<(f64, bool)> = (0..50).map(|i| (0.3 + i as f64 / 100.0, true)).collect();
        let r = thres_search_scores(&scored, 0.9, 0.01).unwrap();
        assert!(r.tau <= 0.01, "{r:?}");
        assert_eq!(r.achieved_accuracy, 1.0);
        assert_eq!(r.selected, 50);
    }

    #[test]
    fn no_reachable_threshold_returns_the_last_probe() {
        let scored: Vec<(f64, bool)> = (0..50).map(|i| (i as f64 / 50.0, false)).collect();
        let r = thres_search_scores(&scored, 0.9, 0.01).unwrap();
        assert_eq!(r.tau, r.last_probe);
        assert!(r.tau > 0.99);
        assert_eq!(r.sweep_tau, None);
    }

    #[test]
    fn agrees_with_the_sweep_on_a_single_cut() {
        let scored: Vec<(f64, bool)> = (0..1000).map(|i| (i as f64 / 1000.0, i >= 400)).collect();
        let r = thres_search_scores(&scored, 0.9, 0.01).unwrap();
        let sweep = r.sweep_tau.unwrap();
        assert!((r.tau - sweep).abs() <= 0.01, "{r:?}");
        assert!(r.achieved_accuracy >= 0.9);
    }

    #[test]
    fn naive_grouping_selects_whole_groups() {
        let mut turns = Vec::new();
        for i in 0..10 {
            turns.push(turn(i, "Music", "PlayMusic", Some("Artist"), i < 8));
        }
        for i in 10..20 {
            turns.push(turn(i, "Weather", "GetForecast", Some("City"), false));
        }
        let d = Dataset::new(turns, Provenance::Live);
        let picked = naive_group_baseline(&d, &["domain", "intent", "slot_types"], 0.7).unwrap();
        assert_eq!(picked.len(), 10);
        assert!(picked.records.iter().all(|t| t.top_interpretation().domain() == "Music"));
        assert!(naive_group_baseline(&d, &["domain"], 0.0).unwrap().len() == 10);
        assert!(matches!(naive_group_baseline(&d, &["nope"], 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_search_parameters() {
        assert!(thres_search_scores(&[], 1.5, 0.01).is_err());
        assert!(thres_search_scores(&[], 0.9, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn search_terminates_within_the_bound(
            scores in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 0..300),
            eps in 0.001f64..0.5,
            lambda in 0.05f64..0.99,
        ) {
            let r = thres_search_scores(&scores, lambda, eps).unwrap();
            prop_assert!(r.iterations <= iteration_bound(eps));
            prop_assert!((0.0..=1.0).contains(&r.tau));
        }

        #[test]
        fn selection_is_monotone_in_tau(
            scores in proptest::collection::vec(0.0f64..1.0, 1..100),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let d = Dataset::new(labels(&vec![true; scores.len()]), Provenance::Live);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let loose = select_by_scores(&d, &scores, lo).turn_ids().into_iter().map(str::to_string).collect::<Vec<_>>();
            let tight = select_by_scores(&d, &scores, hi);
            for id in tight.turn_ids() {
                prop_assert!(loose.iter().any(|l| l == id));
            }
        }
    }
}
