use serde::{Deserialize, Serialize};

use super::plan::{Hand, RunSpec};
use super::session::FeedbackKind;
use crate::listenersim::GenderResponse;
use crate::stimgen::SyllableId;

/// One logged event. Events occupy `[t_us, t_us + duration_us)` on a
/// simulated clock kept in whole microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t_us: u64,
    pub duration_us: u64,
    /// Session-wide trial counter, 0-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    RunBoundary { run_index: usize, label: String },
    Break,
    MappingIndication { male: Hand },
    Processing,
    /// Spans the whole stimulus (all three intervals for a discrimination trial).
    StimulusStart,
    StimulusEnd,
    ResponseEnabled,
    /// Spans the response latency after enablement.
    Response { choice: String },
    Feedback { kind: FeedbackKind },
    Encouragement { message: String },
    EarlyResponse,
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    /// 0 is training.
    pub run_index: usize,
    pub run: RunSpec,
    pub trial_in_run: u32,
    pub syllables: [SyllableId; 3],
    pub delta_st: f64,
    pub step_st: f64,
    pub odd_interval: u8,
    pub response: u8,
    pub correct: bool,
    pub is_reversal: bool,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderTrialRecord {
    pub trial_index: u32,
    pub training: bool,
    pub word: String,
    pub d_f0_st: f64,
    pub d_vtl_st: f64,
    pub male_hand: Hand,
    pub response: GenderResponse,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionLog {
    pub events: Vec<LogEvent>,
    pub trials: Vec<TrialRecord>,
    pub gender_trials: Vec<GenderTrialRecord>,
    clock_us: u64,
}

pub(crate) fn seconds_to_us(s: f64) -> u64 {
    debug_assert!(s >= 0.0 && s.is_finite(), "{s}");
    (s * 1e6).round() as u64
}

impl SessionLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append an event at the current clock and advance the clock by its duration.
    pub fn push(&mut self, kind: EventKind, trial: Option<u32>, duration_us: u64) {
        self.events.push(LogEvent { t_us: self.clock_us, duration_us, trial, kind });
        self.clock_us += duration_us;
    }

    pub fn push_s(&mut self, kind: EventKind, trial: Option<u32>, duration_s: f64) {
        self.push(kind, trial, seconds_to_us(duration_s));
    }

    pub fn now_us(&self) -> u64 {
        self.clock_us
    }

    pub fn total_us(&self) -> u64 {
        self.clock_us
    }

    pub fn total_s(&self) -> f64 {
        self.clock_us as f64 / 1e6
    }

    pub fn response_count(&self, trial: u32) -> usize {
        self.events
            .iter()
            .filter(|e| e.trial == Some(trial) && matches!(e.kind, EventKind::Response { .. }))
            .count()
    }

    /// One event per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }
}

impl GenderTrialRecord {
    pub fn is_male(&self) -> bool {
        self.response == GenderResponse::Male
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_advances_by_durations() {
        let mut log = SessionLog::new();
        log.push(EventKind::Processing, Some(0), 3_000_000);
        log.push(EventKind::StimulusStart, Some(0), 1_234_567);
        log.push(EventKind::StimulusEnd, Some(0), 0);
        assert_eq!(log.events[2].t_us, 4_234_567);
        assert_eq!(log.total_us(), log.events.iter().map(|e| e.duration_us).sum::<u64>());
    }

    #[test]
    fn jsonl_is_one_object_per_line() {
        let mut log = SessionLog::new();
        log.push(EventKind::RunBoundary { run_index: 1, label: "f0-12".into() }, None, 0);
        log.push(EventKind::Response { choice: "2".into() }, Some(3), 10);
        let text = log.to_jsonl();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(v["event"], "response");
        assert_eq!(v["trial"], 3);
        let back: LogEvent = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(back, log.events[0]);
    }
}
