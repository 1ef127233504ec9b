//! Append-only JSON-lines event log, one file per session.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Choice, Experiment, HarnessError};

pub const SESSIONS_DIR: &str = "sessions";
pub const EVENTS_FILE: &str = "events.jsonl";

/// Everything needed to rebuild a session: creation parameters plus the
/// ordered trial and response commands. Wall-clock fields are informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum HarnessEvent {
    Created { session_id: String, experiment: Experiment, profile: String, seed: u64, created_at_ms: u64 },
    TrialServed { trial_id: String, index: u32, synthesis_ms: f64, wall_ms: u64 },
    EarlyResponse { trial_id: String, latency_ms: f64, enabled_after_ms: f64, wall_ms: u64 },
    Response { trial_id: String, choice: Choice, latency_ms: f64, client_timestamp: Option<String>, wall_ms: u64 },
    Paused { wall_ms: u64 },
    Aborted { wall_ms: u64 },
}

pub(crate) fn append_event(path: &Path, event: &HarnessEvent) -> Result<(), HarnessError> {
    let mut line = serde_json::to_string(event).map_err(|e| HarnessError::Corrupt(e.to_string()))?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    // one write per event so a crash leaves at most a torn final line
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

/// Cut a partial final line left by a crash so later appends start clean.
pub(crate) fn truncate_torn_tail(path: &Path) -> Result<(), HarnessError> {
    let bytes = std::fs::read(path)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    Ok(())
}

/// Read a session log. A torn final line (crash mid-write) is dropped; any
/// other malformed line is an error.
pub fn read_events(path: &Path) -> Result<Vec<HarnessEvent>, HarnessError> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut events = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => events.push(e),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(HarnessError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(EVENTS_FILE);
        let events = vec![
            HarnessEvent::Created {
                session_id: "s".into(),
                experiment: Experiment::Gender,
                profile: "laptop".into(),
                seed: 7,
                created_at_ms: 1,
            },
            HarnessEvent::TrialServed { trial_id: "0".into(), index: 0, synthesis_ms: 1.5, wall_ms: 2 },
            HarnessEvent::Response {
                trial_id: "0".into(),
                choice: Choice::Interval(2),
                latency_ms: 900.0,
                client_timestamp: None,
                wall_ms: 3,
            },
        ];
        for e in &events {
            append_event(&path, e).unwrap();
        }
        assert_eq!(read_events(&path).unwrap(), events);
    }

    #[test]
    fn torn_tail_is_ignored_but_inner_damage_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(EVENTS_FILE);
        append_event(&path, &HarnessEvent::Paused { wall_ms: 1 }).unwrap();
        std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"event\":\"abo").unwrap();
        assert_eq!(read_events(&path).unwrap().len(), 1);
        truncate_torn_tail(&path).unwrap();
        append_event(&path, &HarnessEvent::Aborted { wall_ms: 2 }).unwrap();
        assert_eq!(read_events(&path).unwrap().len(), 2);
        std::fs::write(&path, "garbage\n{\"event\":\"paused\",\"wall_ms\":1}\n").unwrap();
        assert!(matches!(read_events(&path), Err(HarnessError::Corrupt(_))));
    }
}
