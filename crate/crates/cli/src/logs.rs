//! Trial-level JSON-lines written by `simulate` and read back by `analyze`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use voicecue_core::analysis::tables::{CueWeightRow, JndRow};
use voicecue_core::analysis::{fit_logistic_weights, GenderObservation};
use voicecue_core::protocol::{GenderTrialRecord, RunSpec, TrialRecord};
use voicecue_core::staircase::{RunResult, StaircaseConfig, StaircaseState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum TrialKind {
    VoiceCue(TrialRecord),
    Gender(GenderTrialRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLine {
    pub participant: String,
    pub interface: String,
    pub session_seed: u64,
    #[serde(flatten)]
    pub trial: TrialKind,
}

pub fn write_lines(path: &Path, lines: &[TrialLine]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for l in lines {
        serde_json::to_writer(&mut out, l)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_lines(path: &Path) -> Result<Vec<TrialLine>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(lines)
}

type SessionKey = (String, String, u64);

fn key(l: &TrialLine) -> SessionKey {
    (l.participant.clone(), l.interface.clone(), l.session_seed)
}

/// Rebuild each test run from its logged responses. The replayed levels must
/// match the logged ones, otherwise the log is inconsistent.
pub fn replay_runs(trials: &[&TrialRecord]) -> Result<Vec<(RunSpec, RunResult)>> {
    let mut by_run: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.run_index >= 1) {
        by_run.entry(t.run_index).or_default().push(t);
    }
    let mut out = Vec::new();
    for (run_index, mut ts) in by_run {
        ts.sort_by_key(|t| t.trial_in_run);
        let spec = ts[0].run;
        let mut state = StaircaseState::new(StaircaseConfig::test(spec.start_delta_st))?;
        for t in ts {
            if (state.level_st() - t.delta_st).abs() > 1e-9 {
                bail!("run {run_index} trial {}: logged level {} but replay gives {}", t.trial_in_run, t.delta_st, state.level_st());
            }
            state.record_response(t.correct)?;
        }
        out.push((spec, state.result()));
    }
    Ok(out)
}

pub fn jnd_rows(lines: &[TrialLine]) -> Result<Vec<JndRow>> {
    let mut sessions: BTreeMap<SessionKey, Vec<&TrialRecord>> = BTreeMap::new();
    for l in lines {
        if let TrialKind::VoiceCue(t) = &l.trial {
            sessions.entry(key(l)).or_default().push(t);
        }
    }
    let mut rows = Vec::new();
    for ((participant, interface, _), trials) in sessions {
        for (spec, res) in replay_runs(&trials)? {
            rows.push(JndRow {
                participant: participant.clone(),
                interface: interface.clone(),
                cue: spec.cue.as_str().into(),
                start_delta_st: spec.start_delta_st,
                jnd_st: res.jnd_st,
                n_trials: res.trials.len(),
                termination: res
                    .termination
                    .map(|t| serde_json::to_value(t).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                    .unwrap_or_default(),
            });
        }
    }
    Ok(rows)
}

/// One fit per session over its test trials; failed fits are skipped and returned as messages.
pub fn cue_weight_rows(lines: &[TrialLine]) -> (Vec<CueWeightRow>, Vec<String>) {
    let mut sessions: BTreeMap<SessionKey, Vec<GenderObservation>> = BTreeMap::new();
    for l in lines {
        if let TrialKind::Gender(t) = &l.trial {
            if !t.training {
                sessions.entry(key(l)).or_default().push(GenderObservation::from_semitones(t.d_f0_st, t.d_vtl_st, t.response));
            }
        }
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((participant, interface, seed), obs) in sessions {
        match fit_logistic_weights(&obs) {
            Ok(w) => rows.push(CueWeightRow::new(&participant, &interface, &w)),
            Err(e) => failures.push(format!("{participant}/{interface}/{seed}: {e}")),
        }
    }
    (rows, failures)
}
