//! Live session service: trial delivery, response handling, audio assets,
//! append-only persistence with replay, and result bundles. Transport-free;
//! the CLI crate puts HTTP in front of it.

mod bundle;
mod service;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::listenersim::GenderResponse;
use crate::protocol::{FeedbackKind, Hand, Phase, ProtocolError, ResponseMapping};
use crate::stimgen::StimError;

pub use bundle::{DiscriminationRow, ResultBundle, RunSummary};
pub use service::{HarnessConfig, HarnessService};
pub use store::{read_events, HarnessEvent, EVENTS_FILE, SESSIONS_DIR};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid session state: {0}")]
    State(String),
    #[error("response arrived {latency_ms} ms after onset, before responses were enabled at {enabled_after_ms} ms")]
    EarlyResponse { latency_ms: f64, enabled_after_ms: f64 },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Stim(#[from] StimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("persistence: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt session log: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    VoiceCue,
    Gender,
}

impl std::str::FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "voice_cue" | "voice-cue" => Ok(Experiment::VoiceCue),
            "gender" => Ok(Experiment::Gender),
            _ => Err(HarnessError::Validation(format!("unknown experiment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Training,
    Running,
    Finished,
    Aborted,
}

impl SessionState {
    pub fn from_phase(phase: Phase) -> Self {
        match phase {
            Phase::Training => SessionState::Training,
            Phase::Test => SessionState::Running,
            Phase::Finished => SessionState::Finished,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub experiment: Experiment,
    pub profile: String,
    pub seed: u64,
    pub state: SessionState,
    /// Unix milliseconds.
    pub created_at_ms: u64,
    pub trials_served: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRef {
    pub hash: String,
    pub url: String,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiHints {
    pub phase: Phase,
    /// Responses earlier than this (ms from trial onset) are rejected.
    pub response_enabled_after_ms: f64,
    pub inter_stimulus_gap_ms: f64,
    /// Gender trials only; shown before responses are enabled.
    pub mapping: Option<ResponseMapping>,
    pub mapping_indication_ms: f64,
    /// Fraction of the test completed, when the profile shows progress.
    pub progress: Option<f64>,
    pub feedback_ms: f64,
    pub negative_feedback: bool,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMessage {
    pub session_id: String,
    pub trial_id: String,
    pub index: u32,
    pub experiment: Experiment,
    /// Play in order; one per interval for discrimination trials.
    pub audio: Vec<AudioRef>,
    pub ui_hints: UiHints,
    /// Time spent producing the audio, throttle included.
    pub synthesis_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Interval(u8),
    Gender(GenderResponse),
}

impl Choice {
    pub fn label(&self) -> String {
        match self {
            Choice::Interval(i) => i.to_string(),
            Choice::Gender(GenderResponse::Male) => "male".into(),
            Choice::Gender(GenderResponse::Female) => "female".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMessage {
    pub trial_id: String,
    pub choice: Choice,
    /// Time from trial onset to the response.
    pub latency_ms: f64,
    #[serde(default)]
    pub client_timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub trial_id: String,
    pub feedback: FeedbackKind,
    pub encouragement: Option<String>,
    pub session_state: SessionState,
}

/// Which side a gender response lands on, for clients that report sides.
pub fn response_for_hand(mapping: ResponseMapping, hand: Hand) -> GenderResponse {
    if hand == mapping.male {
        GenderResponse::Male
    } else {
        GenderResponse::Female
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choices_parse_from_numbers_and_words() {
        let c: Choice = serde_json::from_str("2").unwrap();
        assert_eq!(c, Choice::Interval(2));
        let c: Choice = serde_json::from_str("\"female\"").unwrap();
        assert_eq!(c, Choice::Gender(GenderResponse::Female));
        assert!(serde_json::from_str::<Choice>("\"maybe\"").is_err());
    }

    #[test]
    fn hands_map_to_responses() {
        let m = ResponseMapping { male: Hand::Left };
        assert_eq!(response_for_hand(m, Hand::Left), GenderResponse::Male);
        assert_eq!(response_for_hand(m, Hand::Right), GenderResponse::Female);
    }

    #[test]
    fn experiment_names() {
        assert_eq!("voice_cue".parse::<Experiment>().unwrap(), Experiment::VoiceCue);
        assert!("tablet".parse::<Experiment>().is_err());
    }
}
