//! Line-delimited JSON session logs, one `Turn` per line, sorted by
//! `(session_id, timestamp)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Session, Turn};

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn sessions_to_lines(sessions: &[Session]) -> Vec<&Turn> {
    let mut turns: Vec<&Turn> = sessions.iter().flat_map(|s| s.turns.iter()).collect();
    turns.sort_by(|a, b| a.session_id.cmp(&b.session_id).then(a.timestamp.cmp(&b.timestamp)));
    turns
}

pub fn write_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    write_jsonl(path, sessions_to_lines(sessions))
}

pub fn write_turns(path: &Path, turns: &[Turn]) -> Result<()> {
    write_jsonl(path, turns)
}

pub fn read_turns(path: &Path) -> Result<Vec<Turn>> {
    let turns: Vec<Turn> = read_jsonl(path)?;
    for t in &turns {
        t.validate()?;
    }
    Ok(turns)
}

/// Reads a session log, grouping consecutive lines by `session_id`.
pub fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    Ok(group_sessions(read_turns(path)?))
}

pub fn group_sessions(turns: Vec<Turn>) -> Vec<Session> {
    let mut sessions: Vec<Session> = Vec::new();
    for t in turns {
        match sessions.last_mut() {
            Some(s) if s.session_id == t.session_id => s.turns.push(t),
            _ => sessions.push(Session {
                session_id: t.session_id.clone(),
                user_id: t.user_id.clone(),
                turns: vec![t],
            }),
        }
    }
    sessions
}
