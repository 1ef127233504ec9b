//! Experiment orchestration: session plans, trial generation, encouragement,
//! interface profiles and session-duration simulation.

mod log;
mod plan;
mod profile;
mod session;
mod simulate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::listenersim::ListenerError;
use crate::staircase::StaircaseError;
use crate::stimgen::StimError;

pub use log::{EventKind, GenderTrialRecord, LogEvent, SessionLog, TrialRecord};
pub use plan::{
    encouragement_decide, encouragement_step, next_discrimination_trial, plan_gender_block, plan_voice_cue_session,
    DiscriminationTrialPlan, EncouragementState, GenderBlockPlan, GenderTrialPlan, Hand, ResponseMapping, RunSpec,
    TrialDraw, VoiceCueSessionPlan, CORRECT_MESSAGES, GENDER_F0_ST, GENDER_VTL_ST, GENDER_WORDS, INCORRECT_MESSAGES,
};
pub use profile::{BreakPolicy, InterfaceProfile, ProfileSet, ResponseTimeModel};
pub use session::{
    DiscriminationOutcome, FeedbackKind, GenderOutcome, GenderRunner, GenderTrialResult, Phase, VoiceCueRunner,
};
pub use simulate::{
    calibrate_response_mean, mean_session_duration, simulate_session_duration, Responder, SessionPlan, SimulatedResponder,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Staircase(#[from] StaircaseError),
    #[error(transparent)]
    Stim(#[from] StimError),
    #[error(transparent)]
    Listener(#[from] ListenerError),
    #[error("no admissible syllable triplet left")]
    Exhausted,
    #[error("unknown interface profile {0:?}")]
    UnknownProfile(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Cue {
    F0,
    Vtl,
}

impl Cue {
    pub fn as_str(self) -> &'static str {
        match self {
            Cue::F0 => "f0",
            Cue::Vtl => "vtl",
        }
    }
}

/// Independent 64-bit seed for a named random stream of one session.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_stream_and_seed() {
        assert_eq!(derive_seed(1, "plan"), derive_seed(1, "plan"));
        assert_ne!(derive_seed(1, "plan"), derive_seed(1, "trials"));
        assert_ne!(derive_seed(1, "plan"), derive_seed(2, "plan"));
    }
}
