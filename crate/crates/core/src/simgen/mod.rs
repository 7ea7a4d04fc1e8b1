//! Deterministic synthetic traffic with oracle interpretations.
//!
//! Users issue a few independent requests per session. Requests rendered from
//! a template named by a confusion rule are misread by the simulated NLU at the
//! rule's rate: the wrong interpretation goes to rank 0 and the correct one to a
//! uniformly chosen lower rank. Users barge in on misreads with probability
//! `barge_in_prob_on_error`, then rephrase with a different template of the
//! same intent with probability `rephrase_prob_after_defect`. Correctly served
//! turns are barged in on with probability `random_defect_noise_prob`.
//!
//! Rephrase links are not written to the log; `simulate` returns them on the
//! side so the rephrase detector can be scored.

pub mod catalog;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::sessions::session_key;
use crate::types::{normalize_tokens, Hypothesis, Interpretation, ResponseSignals, Session, Slot, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub domain: String,
    pub intent: String,
    #[serde(default)]
    pub slots: Vec<String>,
    pub templates: Vec<String>,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl IntentSpec {
    pub fn key(&self) -> String {
        format!("{}.{}", self.domain, self.intent)
    }

    pub fn group_id(&self, template: usize) -> String {
        format!("{}:{}", self.key(), self.templates[template])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntentRef {
    pub domain: String,
    pub intent: String,
}

/// A systematic misreading. `trigger` is an utterance-group id of the form
/// `<Domain>.<Intent>:<template>`; slot values of the request are carried over
/// to the wrong interpretation's slot types positionally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRule {
    pub trigger: String,
    pub wrong: IntentRef,
    pub correct: IntentRef,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Behavior {
    pub barge_in_prob_on_error: f64,
    pub rephrase_prob_after_defect: f64,
    pub random_defect_noise_prob: f64,
}

impl Default for Behavior {
    fn default() -> Self {
        Self { barge_in_prob_on_error: 0.95, rephrase_prob_after_defect: 0.7, random_defect_noise_prob: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_sessions: usize,
    pub intent_catalog: Vec<IntentSpec>,
    pub confusion_rules: Vec<ConfusionRule>,
    pub behavior: Behavior,
    pub k_best_size: usize,
    pub slot_values: BTreeMap<String, Vec<String>>,
    pub min_requests_per_session: usize,
    pub max_requests_per_session: usize,
    pub sessions_per_user: usize,
    pub start_timestamp_ms: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_sessions: 2000,
            intent_catalog: catalog::reference_intents(),
            confusion_rules: catalog::reference_rules(),
            behavior: Behavior::default(),
            k_best_size: 5,
            slot_values: catalog::reference_slot_values(),
            min_requests_per_session: 1,
            max_requests_per_session: 5,
            sessions_per_user: 2,
            start_timestamp_ms: 1_700_000_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.intent_catalog.is_empty() {
            return bad("intent catalog is empty".into());
        }
        if self.k_best_size < 2 {
            return bad(format!("k_best_size {} < 2 leaves no room for a correction", self.k_best_size));
        }
        let b = &self.behavior;
        for (name, p) in [
            ("barge_in_prob_on_error", b.barge_in_prob_on_error),
            ("rephrase_prob_after_defect", b.rephrase_prob_after_defect),
            ("random_defect_noise_prob", b.random_defect_noise_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if self.min_requests_per_session == 0 || self.min_requests_per_session > self.max_requests_per_session {
            return bad("requests per session must satisfy 1 <= min <= max".into());
        }
        if self.sessions_per_user == 0 {
            return bad("sessions_per_user must be positive".into());
        }
        let mut keys = BTreeSet::new();
        for spec in &self.intent_catalog {
            if !keys.insert(spec.key()) {
                return bad(format!("intent {} listed twice", spec.key()));
            }
            if spec.templates.len() < 2 {
                return bad(format!("intent {} needs at least two templates", spec.key()));
            }
            if spec.weight.is_nan() || spec.weight <= 0.0 {
                return bad(format!("intent {} has non-positive weight", spec.key()));
            }
            Interpretation::new(
                &spec.domain,
                &spec.intent,
                spec.slots.iter().map(|s| Slot::new(s, "x")).collect(),
            )?;
            for slot in &spec.slots {
                if self.slot_values.get(slot).is_none_or(|v| v.is_empty()) {
                    return bad(format!("no values for slot type {slot}"));
                }
            }
            for t in &spec.templates {
                let mut found: Vec<String> = placeholders(t);
                found.sort();
                let mut want = spec.slots.clone();
                want.sort();
                if found != want {
                    return bad(format!("template `{t}` does not use exactly the slots of {}", spec.key()));
                }
            }
        }
        for r in &self.confusion_rules {
            if !(0.0..=1.0).contains(&r.rate) {
                return bad(format!("rule `{}` rate {} outside [0, 1]", r.trigger, r.rate));
            }
            let correct = self.intent_index(&r.correct).ok_or_else(|| {
                Error::Config(format!("rule `{}`: correct intent not in catalog", r.trigger))
            })?;
            if self.intent_index(&r.wrong).is_none() {
                return Err(Error::Config(format!("rule `{}`: wrong intent not in catalog", r.trigger)));
            }
            if r.wrong == r.correct {
                return bad(format!("rule `{}` maps an intent onto itself", r.trigger));
            }
            let spec = &self.intent_catalog[correct];
            let Some(t) = (0..spec.templates.len()).find(|&t| spec.group_id(t) == r.trigger) else {
                return bad(format!("rule trigger `{}` is not a template of its correct intent", r.trigger));
            };
            if self.rephrase_templates(correct, t).is_empty() {
                return bad(format!("intent {} has no untriggered template to rephrase with", spec.key()));
            }
        }
        Ok(())
    }

    fn intent_index(&self, r: &IntentRef) -> Option<usize> {
        self.intent_catalog.iter().position(|s| s.domain == r.domain && s.intent == r.intent)
    }

    fn rule_for(&self, group: &str) -> Option<&ConfusionRule> {
        self.confusion_rules.iter().find(|r| r.trigger == group)
    }

    fn rephrase_templates(&self, intent: usize, template: usize) -> Vec<usize> {
        let spec = &self.intent_catalog[intent];
        (0..spec.templates.len())
            .filter(|&t| t != template && self.rule_for(&spec.group_id(t)).is_none())
            .collect()
    }
}

fn placeholders(template: &str) -> Vec<String> {
    template
        .split_whitespace()
        .filter_map(|w| w.strip_prefix('{').and_then(|w| w.strip_suffix('}')))
        .map(str::to_string)
        .collect()
}

/// Replaces each oracle slot value in the utterance with its `{Type}`
/// placeholder, recovering the template the utterance was rendered from.
pub fn utterance_group(turn: &Turn) -> Result<String> {
    let oracle = turn.oracle()?;
    let mut tokens: Vec<String> = turn.utterance.clone();
    for slot in oracle.slots() {
        let value = normalize_tokens(&slot.value);
        if value.is_empty() {
            continue;
        }
        if let Some(pos) = tokens.windows(value.len()).position(|w| w == value.as_slice()) {
            tokens.splice(pos..pos + value.len(), [format!("{{{}}}", slot.slot_type)]);
        }
    }
    Ok(format!("{}.{}:{}", oracle.domain(), oracle.intent(), tokens.join(" ")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub sessions: Vec<Session>,
    /// `(defect turn id, rephrase turn id)` for every constructed rephrase.
    pub rephrase_pairs: Vec<(String, String)>,
}

pub fn generate_traffic(cfg: &SimConfig) -> Result<Vec<Session>> {
    Ok(simulate(cfg)?.sessions)
}

pub fn simulate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    Generator::new(cfg).run()
}

struct Generator<'a> {
    cfg: &'a SimConfig,
    rng: seed::Rng,
    neighbors: Vec<Vec<usize>>,
    weight_total: f64,
}

struct Request {
    intent: usize,
    template: usize,
    values: Vec<String>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let n = cfg.intent_catalog.len();
        // same-domain intents and rule partners are the likely runners-up
        let mut neighbors = vec![BTreeSet::new(); n];
        for (i, nb) in neighbors.iter_mut().enumerate() {
            for j in 0..n {
                if i != j && cfg.intent_catalog[i].domain == cfg.intent_catalog[j].domain {
                    nb.insert(j);
                }
            }
        }
        for r in &cfg.confusion_rules {
            let (c, w) = (cfg.intent_index(&r.correct).unwrap(), cfg.intent_index(&r.wrong).unwrap());
            neighbors[c].insert(w);
            neighbors[w].insert(c);
        }
        Self {
            cfg,
            rng: seed::rng(cfg.seed),
            neighbors: neighbors.into_iter().map(|s| s.into_iter().collect()).collect(),
            weight_total: cfg.intent_catalog.iter().map(|s| s.weight).sum(),
        }
    }

    fn run(mut self) -> Result<SimOutput> {
        let cfg = self.cfg;
        let mut sessions = Vec::with_capacity(cfg.n_sessions);
        let mut pairs = Vec::new();
        let week_ms: i64 = 7 * 24 * 3600 * 1000;
        let mut user_clock = cfg.start_timestamp_ms;
        let mut screen = "true";
        for s in 0..cfg.n_sessions {
            let user_ordinal = s / cfg.sessions_per_user;
            let session_ordinal = s % cfg.sessions_per_user;
            let user_id = format!("u{user_ordinal:06}");
            if session_ordinal == 0 {
                user_clock = cfg.start_timestamp_ms + self.rng.gen_range(0..week_ms);
                screen = if self.rng.gen_bool(0.5) { "true" } else { "false" };
            } else {
                user_clock += self.rng.gen_range(3_600_000..6 * 3_600_000);
            }
            let session_id = session_key(&user_id, session_ordinal);
            let mut context = BTreeMap::new();
            context.insert("device_has_screen".to_string(), screen.to_string());

            let n_requests = self.rng.gen_range(cfg.min_requests_per_session..=cfg.max_requests_per_session);
            let mut turns: Vec<Turn> = Vec::new();
            for r in 0..n_requests {
                if r > 0 {
                    user_clock += self.rng.gen_range(100_000..300_000);
                }
                let req = self.sample_request();
                let spec = &cfg.intent_catalog[req.intent];
                let group = spec.group_id(req.template);
                let misread = match cfg.rule_for(&group) {
                    Some(rule) if self.rng.gen_bool(rule.rate) => Some(cfg.intent_index(&rule.wrong).unwrap()),
                    _ => None,
                };
                let barged = if misread.is_some() {
                    self.rng.gen_bool(cfg.behavior.barge_in_prob_on_error)
                } else {
                    self.rng.gen_bool(cfg.behavior.random_defect_noise_prob)
                };
                let turn = self.make_turn(&session_id, &user_id, turns.len(), user_clock, &req, misread, barged, &context);
                let defect_id = turn.turn_id.clone();
                turns.push(turn);

                if misread.is_some() && barged && self.rng.gen_bool(cfg.behavior.rephrase_prob_after_defect) {
                    let options = cfg.rephrase_templates(req.intent, req.template);
                    let template = *options.choose(&mut self.rng).expect("validated");
                    let rephrase = Request { intent: req.intent, template, values: req.values.clone() };
                    user_clock += self.rng.gen_range(3_000..15_000);
                    let barged = self.rng.gen_bool(cfg.behavior.random_defect_noise_prob);
                    let turn =
                        self.make_turn(&session_id, &user_id, turns.len(), user_clock, &rephrase, None, barged, &context);
                    pairs.push((defect_id, turn.turn_id.clone()));
                    turns.push(turn);
                }
            }
            sessions.push(Session { session_id, user_id, turns });
        }
        Ok(SimOutput { sessions, rephrase_pairs: pairs })
    }

    fn sample_request(&mut self) -> Request {
        let cfg = self.cfg;
        let mut x = self.rng.gen_range(0.0..self.weight_total);
        let mut intent = cfg.intent_catalog.len() - 1;
        for (i, spec) in cfg.intent_catalog.iter().enumerate() {
            if x < spec.weight {
                intent = i;
                break;
            }
            x -= spec.weight;
        }
        let spec = &cfg.intent_catalog[intent];
        let template = self.rng.gen_range(0..spec.templates.len());
        let values = spec
            .slots
            .iter()
            .map(|slot| cfg.slot_values[slot].choose(&mut self.rng).unwrap().clone())
            .collect();
        Request { intent, template, values }
    }

    fn realize(&mut self, intent: usize, values: &[String]) -> Interpretation {
        let spec = &self.cfg.intent_catalog[intent];
        let slots = spec
            .slots
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                let value = match values.get(i) {
                    Some(v) => v.clone(),
                    None => self.cfg.slot_values[slot].choose(&mut self.rng).unwrap().clone(),
                };
                Slot::new(slot, value)
            })
            .collect();
        Interpretation::new(&spec.domain, &spec.intent, slots).expect("validated catalog")
    }

    fn kbest(&mut self, req: &Request, misread: Option<usize>) -> Vec<Hypothesis> {
        let n = self.cfg.intent_catalog.len();
        let k = self.cfg.k_best_size.min(n);
        let mut near: Vec<usize> = self.neighbors[req.intent].clone();
        near.shuffle(&mut self.rng);
        let mut far: Vec<usize> = (0..n).filter(|i| *i != req.intent && !near.contains(i)).collect();
        far.shuffle(&mut self.rng);
        let mut alternates: Vec<usize> =
            near.into_iter().chain(far).filter(|&i| Some(i) != misread).collect();

        let mut order: Vec<usize> = Vec::with_capacity(k);
        match misread {
            Some(wrong) => {
                let correct_rank = self.rng.gen_range(1..k);
                order.push(wrong);
                alternates.truncate(k - 2);
                order.extend(alternates);
                order.insert(correct_rank, req.intent);
            }
            None => {
                order.push(req.intent);
                alternates.truncate(k - 1);
                order.extend(alternates);
            }
        }

        let top = if misread.is_some() { self.rng.gen_range(0.40..0.80) } else { self.rng.gen_range(0.55..0.98) };
        let mut confidences = vec![round4(top)];
        let mut prev = round4(top);
        let mut rest = 1.0 - top;
        for _ in 1..order.len() {
            let c = round4((rest * self.rng.gen_range(0.3..0.9)).min(prev));
            rest -= c;
            confidences.push(c);
            prev = c;
        }

        order
            .into_iter()
            .zip(confidences)
            .enumerate()
            .map(|(rank, (intent, confidence))| Hypothesis {
                interpretation: self.realize(intent, &req.values),
                confidence,
                rank,
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn make_turn(
        &mut self,
        session_id: &str,
        user_id: &str,
        index: usize,
        timestamp: i64,
        req: &Request,
        misread: Option<usize>,
        barged_in: bool,
        context: &BTreeMap<String, String>,
    ) -> Turn {
        let spec = &self.cfg.intent_catalog[req.intent];
        let mut text = spec.templates[req.template].clone();
        for (slot, value) in spec.slots.iter().zip(&req.values) {
            text = text.replace(&format!("{{{slot}}}"), value);
        }
        let oracle = self.realize(req.intent, &req.values);
        let hypotheses = self.kbest(req, misread);
        let response_text = format!("serving {}", hypotheses[0].interpretation);
        Turn {
            turn_id: format!("{session_id}/t{index}"),
            session_id: session_id.to_string(),
            user_id: user_id.to_string(),
            timestamp,
            utterance: normalize_tokens(&text),
            hypotheses,
            context: context.clone(),
            response: ResponseSignals { response_text, barged_in, terminated_early: false },
            defect_label: None,
            rephrase_of: None,
            oracle_interpretation: Some(oracle),
        }
    }
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub correct: usize,
    pub incorrect: usize,
}

impl GroupCounts {
    pub fn accuracy(&self) -> f64 {
        let n = self.correct + self.incorrect;
        if n == 0 {
            0.0
        } else {
            self.correct as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub groups: BTreeMap<String, GroupCounts>,
    pub total: GroupCounts,
    pub defect_signal_rate: f64,
}

/// Top-1 accuracy against the oracle, per utterance group.
pub fn oracle_report(sessions: &[Session]) -> Result<OracleReport> {
    let mut groups: BTreeMap<String, GroupCounts> = BTreeMap::new();
    let mut total = GroupCounts::default();
    let mut signals = 0usize;
    for t in sessions.iter().flat_map(|s| &s.turns) {
        let hit = t.top_interpretation() == t.oracle()?;
        let g = groups.entry(utterance_group(t)?).or_default();
        if hit {
            g.correct += 1;
            total.correct += 1;
        } else {
            g.incorrect += 1;
            total.incorrect += 1;
        }
        if t.response.barged_in || t.response.terminated_early {
            signals += 1;
        }
    }
    let n = total.correct + total.incorrect;
    let defect_signal_rate = if n == 0 { 0.0 } else { signals as f64 / n as f64 };
    Ok(OracleReport { groups, total, defect_signal_rate })
}
