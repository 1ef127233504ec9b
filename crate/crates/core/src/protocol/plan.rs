use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Cue, ProtocolError};
use crate::staircase::StaircaseState;
use crate::stimgen::{SyllableId, VoiceTransform};

/// One test run of the discrimination task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub cue: Cue,
    pub start_delta_st: f64,
}

impl RunSpec {
    /// Male-like and child-like starting differences per cue.
    pub const ALL: [RunSpec; 4] = [
        RunSpec { cue: Cue::F0, start_delta_st: -12.0 },
        RunSpec { cue: Cue::F0, start_delta_st: 5.0 },
        RunSpec { cue: Cue::Vtl, start_delta_st: 3.8 },
        RunSpec { cue: Cue::Vtl, start_delta_st: -7.0 },
    ];

    pub fn new(cue: Cue, start_delta_st: f64) -> Result<Self, ProtocolError> {
        let spec = RunSpec { cue, start_delta_st };
        if Self::ALL.contains(&spec) {
            Ok(spec)
        } else {
            Err(ProtocolError::Config(format!(
                "no run starts at {start_delta_st} st for {}",
                cue.as_str()
            )))
        }
    }

    pub fn direction_sign(&self) -> f64 {
        self.start_delta_st.signum()
    }

    pub fn label(&self) -> String {
        format!("{}{:+}", self.cue.as_str(), self.start_delta_st)
    }

    pub fn transform(&self, signed_level_st: f64) -> VoiceTransform {
        match self.cue {
            Cue::F0 => VoiceTransform::f0(signed_level_st),
            Cue::Vtl => VoiceTransform::vtl(signed_level_st),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceCueSessionPlan {
    pub seed: u64,
    /// The training run's direction; it always uses the fixed training step.
    pub training: RunSpec,
    pub runs: [RunSpec; 4],
}

pub fn plan_voice_cue_session(seed: u64) -> VoiceCueSessionPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "voice-cue-plan"));
    let mut runs = RunSpec::ALL;
    runs.shuffle(&mut rng);
    let training = RunSpec::ALL[rng.random_range(0..RunSpec::ALL.len())];
    VoiceCueSessionPlan { seed, training, runs }
}

/// Random part of a discrimination trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialDraw {
    pub syllables: [SyllableId; 3],
    /// 1-based.
    pub odd_interval: u8,
}

const MAX_DRAW_ATTEMPTS: usize = 10_000;

/// Draw the next trial: three distinct syllables (an ordered triplet not used
/// in training) and the odd interval; the level comes from `state`.
pub fn next_discrimination_trial<R: Rng + ?Sized>(
    state: &StaircaseState,
    excluded: &HashSet<[SyllableId; 3]>,
    inventory_len: usize,
    rng: &mut R,
) -> Result<(TrialDraw, f64), ProtocolError> {
    if let Some(reason) = state.termination() {
        return Err(crate::staircase::StaircaseError::Terminated(reason).into());
    }
    if inventory_len < 3 {
        return Err(ProtocolError::Exhausted);
    }
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let idx = index::sample(rng, inventory_len, 3);
        let syllables = [SyllableId(idx.index(0)), SyllableId(idx.index(1)), SyllableId(idx.index(2))];
        if excluded.contains(&syllables) {
            continue;
        }
        let odd_interval = rng.random_range(1..=3u8);
        return Ok((TrialDraw { syllables, odd_interval }, state.level_st()));
    }
    Err(ProtocolError::Exhausted)
}

/// A fully specified discrimination trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationTrialPlan {
    /// 0 is the training run, 1..=4 the test runs.
    pub run_index: usize,
    pub run: RunSpec,
    pub trial_in_run: u32,
    pub syllables: [SyllableId; 3],
    pub odd_interval: u8,
    pub delta_st: f64,
    pub step_st: f64,
}

impl DiscriminationTrialPlan {
    pub fn transform(&self) -> VoiceTransform {
        self.run.transform(self.delta_st)
    }
}

pub const CORRECT_MESSAGES: [&str; 2] = ["Keep going!", "Doing well."];
pub const INCORRECT_MESSAGES: [&str; 2] = ["Give it another go", "Keep trying"];

const ENCOURAGEMENT_BASE: f64 = 0.1;
const ENCOURAGEMENT_INCREMENT: f64 = 0.05;

/// Random encouragement threshold; kept as a miss count so the threshold is
/// exactly `0.1 + 0.05 k` after `k` silent incorrect trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncouragementState {
    pub silent_misses: u32,
}

impl EncouragementState {
    pub fn threshold(&self) -> f64 {
        ENCOURAGEMENT_BASE + ENCOURAGEMENT_INCREMENT * self.silent_misses as f64
    }
}

/// Decide with an explicit uniform draw `u` and message index `pick`.
pub fn encouragement_decide(
    state: EncouragementState,
    prev_correct: bool,
    u: f64,
    pick: usize,
) -> (Option<&'static str>, EncouragementState) {
    if u < state.threshold() {
        let set = if prev_correct { &CORRECT_MESSAGES } else { &INCORRECT_MESSAGES };
        (Some(set[pick % set.len()]), EncouragementState::default())
    } else if prev_correct {
        (None, state)
    } else {
        (None, EncouragementState { silent_misses: state.silent_misses + 1 })
    }
}

pub fn encouragement_step<R: Rng + ?Sized>(
    state: EncouragementState,
    prev_correct: bool,
    rng: &mut R,
) -> (Option<&'static str>, EncouragementState) {
    let u: f64 = rng.random();
    let pick = rng.random_range(0..2usize);
    encouragement_decide(state, prev_correct, u, pick)
}

pub const GENDER_WORDS: [&str; 4] = ["bike", "pool", "watch", "hat"];
pub const GENDER_F0_ST: [f64; 3] = [0.0, -6.0, -12.0];
pub const GENDER_VTL_ST: [f64; 3] = [0.0, 1.8, 3.6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

/// Which response hand (or screen side) stands for "male"; the other is "female".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResponseMapping {
    pub male: Hand,
}

impl ResponseMapping {
    pub fn female(&self) -> Hand {
        self.male.other()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderTrialPlan {
    pub word: String,
    pub d_f0_st: f64,
    pub d_vtl_st: f64,
    pub mapping: ResponseMapping,
}

impl GenderTrialPlan {
    pub fn transform(&self) -> VoiceTransform {
        VoiceTransform::new(self.d_f0_st, self.d_vtl_st)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderBlockPlan {
    pub seed: u64,
    pub training: Vec<GenderTrialPlan>,
    pub test: Vec<GenderTrialPlan>,
}

impl GenderBlockPlan {
    pub fn len(&self) -> usize {
        self.training.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Training trials first, then test trials.
    pub fn trial(&self, i: usize) -> Option<&GenderTrialPlan> {
        if i < self.training.len() {
            self.training.get(i)
        } else {
            self.test.get(i - self.training.len())
        }
    }
}

pub fn plan_gender_block(seed: u64) -> GenderBlockPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gender-plan"));
    let mut training: Vec<(&str, f64, f64)> = Vec::new();
    for w in GENDER_WORDS {
        training.push((w, 0.0, 0.0));
        training.push((w, -12.0, 3.6));
    }
    training.shuffle(&mut rng);
    let mut test: Vec<(&str, f64, f64)> = Vec::new();
    for w in GENDER_WORDS {
        for f in GENDER_F0_ST {
            for v in GENDER_VTL_ST {
                test.push((w, f, v));
            }
        }
    }
    test.shuffle(&mut rng);
    let mut with_mapping = |(w, f, v): (&str, f64, f64)| GenderTrialPlan {
        word: w.to_string(),
        d_f0_st: f,
        d_vtl_st: v,
        mapping: ResponseMapping { male: if rng.random::<bool>() { Hand::Left } else { Hand::Right } },
    };
    let training = training.into_iter().map(&mut with_mapping).collect();
    let test = test.into_iter().map(&mut with_mapping).collect();
    GenderBlockPlan { seed, training, test }
}
