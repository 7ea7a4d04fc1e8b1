//! Session reconstruction from raw turn streams and session-level splits.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;
use crate::types::{Dataset, Provenance, Session, Turn};

pub const DEFAULT_SESSION_GAP_MS: i64 = 600_000;

pub fn session_key(user_id: &str, ordinal: usize) -> String {
    format!("{user_id}#{ordinal}")
}

/// Groups turns by user, orders them by time and cuts a new session whenever
/// two consecutive turns are more than `session_gap_ms` apart.
///
/// Each turn's `session_id` is rewritten to `<user_id>#<n>`, `n` counting the
/// user's sessions from zero. Every other field is left untouched.
pub fn sessionize(turns: Vec<Turn>, session_gap_ms: i64) -> Result<Vec<Session>> {
    let mut seen = HashSet::with_capacity(turns.len());
    for t in &turns {
        if !seen.insert(t.turn_id.clone()) {
            return Err(Error::DuplicateTurnId(t.turn_id.clone()));
        }
    }
    let mut by_user: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for t in turns {
        by_user.entry(t.user_id.clone()).or_default().push(t);
    }

    let mut sessions = Vec::new();
    for (user, mut user_turns) in by_user {
        user_turns.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.turn_id.cmp(&b.turn_id)));
        if let Some(w) = user_turns.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(Error::InvalidTurn {
                turn_id: w[1].turn_id.clone(),
                reason: format!("shares timestamp {} with `{}`", w[1].timestamp, w[0].turn_id),
            });
        }
        let mut current: Vec<Turn> = Vec::new();
        let mut ordinal = 0;
        for t in user_turns {
            if let Some(last) = current.last() {
                if t.timestamp - last.timestamp > session_gap_ms {
                    sessions.push(close_session(&user, ordinal, std::mem::take(&mut current)));
                    ordinal += 1;
                }
            }
            current.push(t);
        }
        if !current.is_empty() {
            sessions.push(close_session(&user, ordinal, current));
        }
    }
    Ok(sessions)
}

fn close_session(user: &str, ordinal: usize, mut turns: Vec<Turn>) -> Session {
    let session_id = session_key(user, ordinal);
    for t in &mut turns {
        t.session_id = session_id.clone();
    }
    Session { session_id, user_id: user.to_string(), turns }
}

pub fn flatten(sessions: &[Session]) -> Vec<Turn> {
    sessions.iter().flat_map(|s| s.turns.iter().cloned()).collect()
}

/// Splits a dataset by session in approximately `ratio.0 : ratio.1` proportion
/// (counted in turns). Sessions are shuffled with `seed` and each is assigned to
/// whichever side is further below its target, so the sides miss their exact
/// sizes by at most one session. Record order within each side is preserved.
pub fn split_dataset(d: &Dataset, ratio: (u32, u32), seed: u64) -> Result<(Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ratio.0 == 0 || ratio.1 == 0 {
        return Err(Error::Config(format!("split ratio {}:{} must be positive", ratio.0, ratio.1)));
    }

    let mut order: Vec<&str> = Vec::new();
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for t in &d.records {
        let n = sizes.entry(t.session_id.as_str()).or_insert(0);
        if *n == 0 {
            order.push(t.session_id.as_str());
        }
        *n += 1;
    }
    order.shuffle(&mut seed::rng(seed));

    let total = d.len() as f64;
    let share = ratio.0 as f64 / (ratio.0 + ratio.1) as f64;
    let (target_a, target_b) = (total * share, total * (1.0 - share));
    let (mut a, mut b) = (0usize, 0usize);
    let mut side_a: HashSet<&str> = HashSet::new();
    for sid in order {
        let n = sizes[sid];
        if target_a - a as f64 >= target_b - b as f64 {
            side_a.insert(sid);
            a += n;
        } else {
            b += n;
        }
    }

    let (first, second): (Vec<Turn>, Vec<Turn>) =
        d.records.iter().cloned().partition(|t| side_a.contains(t.session_id.as_str()));
    Ok((Dataset::new(first, Provenance::TrainSplit), Dataset::new(second, Provenance::ValidSplit)))
}
