//! Curated supervision, the final k-best re-ranker, and oracle-based shadow
//! evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dcm;
use crate::error::{Error, Result};
use crate::features::reranker_features;
use crate::nn::{Dims, Model, RawFeatures, TrainConfig};
use crate::simgen::utterance_group;
use crate::types::{Dataset, Hypothesis, Interpretation, Session, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    PassThrough,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisionRecord {
    pub turn: Turn,
    pub gold: Interpretation,
    pub origin: Origin,
}

/// Target defects get the correction model's choice as their label; every
/// other sampled turn keeps its baseline top-1.
pub fn build_curated_dataset(d_sample: &Dataset, d_target: &Dataset, dcm_model: &Model) -> Result<Vec<SupervisionRecord>> {
    let targets = d_target.turn_ids();
    let sample_ids = d_sample.turn_ids();
    if let Some(id) = targets.iter().find(|id| !sample_ids.contains(*id)) {
        return Err(Error::InvalidTurn { turn_id: id.to_string(), reason: "target defect is not in the sample".into() });
    }
    d_sample
        .records
        .iter()
        .map(|t| {
            Ok(if targets.contains(t.turn_id.as_str()) {
                SupervisionRecord { turn: t.clone(), gold: dcm::correct(t, dcm_model)?, origin: Origin::Corrected }
            } else {
                SupervisionRecord { turn: t.clone(), gold: t.top_interpretation().clone(), origin: Origin::PassThrough }
            })
        })
        .collect()
}

/// Pointwise samples: each hypothesis is positive iff it equals the gold
/// label. Records whose gold is not in their k-best are skipped.
pub fn reranker_samples(records: &[SupervisionRecord]) -> Vec<(RawFeatures, bool)> {
    let mut out = Vec::new();
    for r in records {
        if !r.turn.hypotheses.iter().any(|h| h.interpretation == r.gold) {
            log::warn!("record {}: gold label not in the k-best, skipped", r.turn.turn_id);
            continue;
        }
        for h in &r.turn.hypotheses {
            out.push((reranker_features(&r.turn, h), h.interpretation == r.gold));
        }
    }
    out
}

pub fn train_reranker(records: &[SupervisionRecord], cfg: &TrainConfig, dims: &Dims, seed: u64) -> Result<Model> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Model::fit(&reranker_samples(records), dims, cfg, seed)
}

/// Sorts by descending score, ties by original rank, and renumbers ranks.
/// Confidences stay attached to their hypotheses.
pub fn rerank_by_scores(hypotheses: &[Hypothesis], scores: &[f64]) -> Vec<Hypothesis> {
    let mut order: Vec<usize> = (0..hypotheses.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(hypotheses[a].rank.cmp(&hypotheses[b].rank)));
    order
        .into_iter()
        .enumerate()
        .map(|(rank, i)| Hypothesis { rank, ..hypotheses[i].clone() })
        .collect()
}

pub fn rerank(t: &Turn, model: &Model) -> Result<Vec<Hypothesis>> {
    let scores = t.hypotheses.iter().map(|h| model.score(&reranker_features(t, h))).collect::<Result<Vec<_>>>()?;
    Ok(rerank_by_scores(&t.hypotheses, &scores))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinLoss {
    pub total: usize,
    pub win: usize,
    pub loss: usize,
    pub tie: usize,
}

impl WinLoss {
    pub fn delta1(&self) -> i64 {
        self.win as i64 - self.loss as i64
    }

    pub fn delta2(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.delta1() as f64 / self.total as f64
        }
    }

    fn add(&mut self, o: Outcome) {
        self.total += 1;
        match o {
            Outcome::Win => self.win += 1,
            Outcome::Loss => self.loss += 1,
            Outcome::Tie => self.tie += 1,
        }
    }
}

#[derive(Clone, Copy)]
enum Outcome {
    Win,
    Loss,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Win/loss/tie over delta turns (re-ranked top-1 differs from the
    /// baseline), keyed by oracle domain.
    pub per_domain: BTreeMap<String, WinLoss>,
    pub overall: WinLoss,
    pub delta1: i64,
    pub delta2: f64,
    pub n_turns: usize,
    pub changed_fraction: f64,
    /// Fraction of delta turns whose baseline top-1 misses the oracle.
    pub defect_proxy_ratio_before: f64,
    /// Fraction of delta turns whose re-ranked top-1 misses the oracle.
    pub defect_proxy_ratio_after: f64,
    pub oracle_accuracy_before: f64,
    pub oracle_accuracy_after: f64,
    /// Top-1 accuracy over utterance groups where the baseline makes errors.
    pub confused_group_accuracy_before: f64,
    pub confused_group_accuracy_after: f64,
    /// Win/loss adjudication uses simulator oracle labels.
    pub adjudication: String,
}

impl EvalReport {
    /// Aligned plain-text table with Total/Win/Loss/Tie/Delta1/Delta2 columns.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<14} {:>7} {:>6} {:>6} {:>6} {:>7} {:>8}", "Domain", "Total", "Win", "Loss", "Tie", "Delta1", "Delta2");
        let mut row = |name: &str, c: &WinLoss| {
            let _ = writeln!(
                s,
                "{:<14} {:>7} {:>6} {:>6} {:>6} {:>7} {:>7.1}%",
                name,
                c.total,
                c.win,
                c.loss,
                c.tie,
                c.delta1(),
                100.0 * c.delta2()
            );
        };
        for (d, c) in &self.per_domain {
            row(d, c);
        }
        row("Overall", &self.overall);
        let _ = writeln!(
            s,
            "changed {:.2}% of {} turns; defect proxy on delta turns {:.1}% -> {:.1}%; oracle accuracy {:.2}% -> {:.2}%",
            100.0 * self.changed_fraction,
            self.n_turns,
            100.0 * self.defect_proxy_ratio_before,
            100.0 * self.defect_proxy_ratio_after,
            100.0 * self.oracle_accuracy_before,
            100.0 * self.oracle_accuracy_after
        );
        s
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Compares baseline and re-ranked top-1 against the oracle on every turn.
pub fn evaluate_shadow(baseline_logs: &[Session], model: &Model) -> Result<EvalReport> {
    let mut tops = Vec::new();
    for t in baseline_logs.iter().flat_map(|s| &s.turns) {
        let oracle = t.oracle()?;
        let new_top = rerank(t, model)?.swap_remove(0).interpretation;
        tops.push((t, oracle, new_top));
    }
    evaluate_tops(tops.iter().map(|(t, o, n)| (*t, *o, n)))
}

/// Shared evaluation core over `(turn, oracle, re-ranked top-1)` triples.
pub fn evaluate_tops<'a>(rows: impl Iterator<Item = (&'a Turn, &'a Interpretation, &'a Interpretation)>) -> Result<EvalReport> {
    let mut per_domain: BTreeMap<String, WinLoss> = BTreeMap::new();
    let mut overall = WinLoss::default();
    let (mut n, mut before_ok, mut after_ok, mut changed) = (0, 0, 0, 0);
    let (mut before_wrong_delta, mut after_wrong_delta) = (0, 0);
    let mut groups: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (t, oracle, new_top) in rows {
        n += 1;
        let base = t.top_interpretation();
        let (b_ok, a_ok) = (base == oracle, new_top == oracle);
        before_ok += usize::from(b_ok);
        after_ok += usize::from(a_ok);
        let g = groups.entry(utterance_group(t)?).or_default();
        g.0 += 1;
        g.1 += usize::from(b_ok);
        g.2 += usize::from(a_ok);
        if base == new_top {
            continue;
        }
        changed += 1;
        before_wrong_delta += usize::from(!b_ok);
        after_wrong_delta += usize::from(!a_ok);
        let outcome = match (a_ok, b_ok) {
            (true, false) => Outcome::Win,
            (false, true) => Outcome::Loss,
            _ => Outcome::Tie,
        };
        overall.add(outcome);
        per_domain.entry(oracle.domain().to_string()).or_default().add(outcome);
    }
    let confused: Vec<&(usize, usize, usize)> = groups.values().filter(|g| g.1 < g.0).collect();
    let c_total: usize = confused.iter().map(|g| g.0).sum();
    let c_before: usize = confused.iter().map(|g| g.1).sum();
    let c_after: usize = confused.iter().map(|g| g.2).sum();
    Ok(EvalReport {
        per_domain,
        delta1: overall.delta1(),
        delta2: overall.delta2(),
        overall,
        n_turns: n,
        changed_fraction: ratio(changed, n),
        defect_proxy_ratio_before: ratio(before_wrong_delta, changed),
        defect_proxy_ratio_after: ratio(after_wrong_delta, changed),
        oracle_accuracy_before: ratio(before_ok, n),
        oracle_accuracy_after: ratio(after_ok, n),
        confused_group_accuracy_before: ratio(c_before, c_total),
        confused_group_accuracy_after: ratio(c_after, c_total),
        adjudication: "simulator oracle".into(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub total: usize,
    pub seeded_confusion: usize,
    pub nuisance: usize,
    pub seeded_confusion_fraction: f64,
    pub nuisance_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub defects: Attribution,
    pub targets: Attribution,
    /// Ratio of the seeded-confusion fractions, targets over defects.
    pub enrichment: f64,
}

/// A defect whose served top-1 differs from the oracle is attributed to a
/// seeded NLU confusion, any other defect to nuisance noise.
pub fn attribute(turns: &[Turn]) -> Result<Attribution> {
    let mut a = Attribution { total: turns.len(), ..Attribution::default() };
    for t in turns {
        if t.top_interpretation() != t.oracle()? {
            a.seeded_confusion += 1;
        } else {
            a.nuisance += 1;
        }
    }
    a.seeded_confusion_fraction = ratio(a.seeded_confusion, a.total);
    a.nuisance_fraction = ratio(a.nuisance, a.total);
    Ok(a)
}

pub fn error_attribution_report(defects: &Dataset, targets: &Dataset) -> Result<AttributionReport> {
    let d = attribute(&defects.records)?;
    let t = attribute(&targets.records)?;
    let enrichment = if d.seeded_confusion_fraction > 0.0 { t.seeded_confusion_fraction / d.seeded_confusion_fraction } else { 0.0 };
    Ok(AttributionReport { defects: d, targets: t, enrichment })
}
