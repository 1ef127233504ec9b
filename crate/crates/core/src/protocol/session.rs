//! Sequential state machines for the two tests: one pending trial at a time.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::plan::{
    encouragement_step, next_discrimination_trial, plan_gender_block, plan_voice_cue_session,
    DiscriminationTrialPlan, EncouragementState, GenderBlockPlan, GenderTrialPlan, RunSpec, VoiceCueSessionPlan,
};
use super::{derive_seed, ProtocolError};
use crate::listenersim::GenderResponse;
use crate::staircase::{RunResult, StaircaseConfig, StaircaseState};
use crate::stimgen::SyllableId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Positive,
    Negative,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Training,
    Test,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationOutcome {
    pub trial_index: u32,
    pub correct: bool,
    pub feedback: FeedbackKind,
    pub encouragement: Option<String>,
    pub is_reversal: bool,
    pub run_finished: bool,
    pub session_finished: bool,
}

/// Training run followed by the four test runs of the voice-cue test.
#[derive(Debug, Clone)]
pub struct VoiceCueRunner {
    plan: VoiceCueSessionPlan,
    inventory_len: usize,
    negative_feedback: bool,
    /// 0 is training, 1..=4 index `plan.runs`, 5 means finished.
    run_index: usize,
    staircase: StaircaseState,
    trial_rng: ChaCha8Rng,
    encouragement_rng: ChaCha8Rng,
    encouragement: EncouragementState,
    training_triplets: HashSet<[SyllableId; 3]>,
    pending: Option<DiscriminationTrialPlan>,
    trial_count: u32,
    answered_syllables: Vec<[SyllableId; 3]>,
    training_result: Option<RunResult>,
    run_results: Vec<RunResult>,
}

impl VoiceCueRunner {
    pub fn new(seed: u64, inventory_len: usize, negative_feedback: bool) -> Result<Self, ProtocolError> {
        let plan = plan_voice_cue_session(seed);
        let staircase = StaircaseState::new(StaircaseConfig::training(plan.training.start_delta_st))?;
        Ok(Self {
            inventory_len,
            negative_feedback,
            run_index: 0,
            staircase,
            trial_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "voice-cue-trials")),
            encouragement_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "encouragement")),
            encouragement: EncouragementState::default(),
            training_triplets: HashSet::new(),
            pending: None,
            trial_count: 0,
            answered_syllables: Vec::new(),
            training_result: None,
            run_results: Vec::new(),
            plan,
        })
    }

    pub fn plan(&self) -> &VoiceCueSessionPlan {
        &self.plan
    }

    pub fn phase(&self) -> Phase {
        match self.run_index {
            0 => Phase::Training,
            1..=4 => Phase::Test,
            _ => Phase::Finished,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.phase() == Phase::Finished
    }

    pub fn run_index(&self) -> usize {
        self.run_index
    }

    pub fn current_run(&self) -> Option<RunSpec> {
        match self.run_index {
            0 => Some(self.plan.training),
            i @ 1..=4 => Some(self.plan.runs[i - 1]),
            _ => None,
        }
    }

    pub fn staircase(&self) -> &StaircaseState {
        &self.staircase
    }

    pub fn pending(&self) -> Option<&DiscriminationTrialPlan> {
        self.pending.as_ref()
    }

    pub fn trial_count(&self) -> u32 {
        self.trial_count
    }

    /// Syllable triplets of answered trials, in order.
    pub fn served_syllables(&self) -> &[[SyllableId; 3]] {
        &self.answered_syllables
    }

    pub fn training_result(&self) -> Option<&RunResult> {
        self.training_result.as_ref()
    }

    /// Results of completed test runs, in presentation order.
    pub fn run_results(&self) -> &[RunResult] {
        &self.run_results
    }

    pub fn training_triplets(&self) -> &HashSet<[SyllableId; 3]> {
        &self.training_triplets
    }

    /// Completed test runs over four.
    pub fn progress(&self) -> f64 {
        self.run_results.len() as f64 / 4.0
    }

    pub fn next_trial(&mut self) -> Result<DiscriminationTrialPlan, ProtocolError> {
        if self.pending.is_some() {
            return Err(ProtocolError::State("a trial is already pending".into()));
        }
        let run = self.current_run().ok_or_else(|| ProtocolError::State("session finished".into()))?;
        let excluded = if self.run_index == 0 { HashSet::new() } else { self.training_triplets.clone() };
        let (draw, delta_st) =
            next_discrimination_trial(&self.staircase, &excluded, self.inventory_len, &mut self.trial_rng)?;
        if self.run_index == 0 {
            self.training_triplets.insert(draw.syllables);
        }
        let plan = DiscriminationTrialPlan {
            run_index: self.run_index,
            run,
            trial_in_run: self.staircase.trial_index() + 1,
            syllables: draw.syllables,
            odd_interval: draw.odd_interval,
            delta_st,
            step_st: self.staircase.current_step_st(),
        };
        self.pending = Some(plan.clone());
        Ok(plan)
    }

    /// Answer the pending trial with a 1-based interval.
    pub fn submit(&mut self, chosen_interval: u8) -> Result<DiscriminationOutcome, ProtocolError> {
        if !(1..=3).contains(&chosen_interval) {
            return Err(ProtocolError::Config(format!("interval must be 1, 2 or 3, got {chosen_interval}")));
        }
        let trial = self.pending.take().ok_or_else(|| ProtocolError::State("no pending trial".into()))?;
        let correct = chosen_interval == trial.odd_interval;
        self.answered_syllables.push(trial.syllables);
        self.staircase.record_response(correct)?;
        let is_reversal = self.staircase.history().last().is_some_and(|r| r.is_reversal);
        let feedback = match (correct, self.negative_feedback) {
            (true, _) => FeedbackKind::Positive,
            (false, true) => FeedbackKind::Negative,
            (false, false) => FeedbackKind::None,
        };
        let (message, next) = encouragement_step(self.encouragement, correct, &mut self.encouragement_rng);
        self.encouragement = next;
        let trial_index = self.trial_count;
        self.trial_count += 1;

        let run_finished = self.staircase.is_terminated();
        if run_finished {
            let result = self.staircase.result();
            if self.run_index == 0 {
                self.training_result = Some(result);
            } else {
                self.run_results.push(result);
            }
            self.run_index += 1;
            if let Some(run) = self.current_run() {
                self.staircase = StaircaseState::new(StaircaseConfig::test(run.start_delta_st))?;
            }
        }
        Ok(DiscriminationOutcome {
            trial_index,
            correct,
            feedback,
            encouragement: message.map(str::to_string),
            is_reversal,
            run_finished,
            session_finished: self.is_finished(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderTrialResult {
    pub trial_index: u32,
    pub training: bool,
    pub trial: GenderTrialPlan,
    pub response: GenderResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderOutcome {
    pub trial_index: u32,
    /// Always `None`: the gender test gives no feedback.
    pub feedback: FeedbackKind,
    pub session_finished: bool,
}

#[derive(Debug, Clone)]
pub struct GenderRunner {
    plan: GenderBlockPlan,
    next_index: usize,
    pending: bool,
    results: Vec<GenderTrialResult>,
}

impl GenderRunner {
    pub fn new(seed: u64) -> Self {
        Self { plan: plan_gender_block(seed), next_index: 0, pending: false, results: Vec::new() }
    }

    pub fn plan(&self) -> &GenderBlockPlan {
        &self.plan
    }

    pub fn phase(&self) -> Phase {
        if self.next_index < self.plan.training.len() {
            Phase::Training
        } else if self.next_index < self.plan.len() {
            Phase::Test
        } else {
            Phase::Finished
        }
    }

    pub fn is_finished(&self) -> bool {
        self.phase() == Phase::Finished
    }

    pub fn pending(&self) -> Option<(u32, &GenderTrialPlan)> {
        if !self.pending {
            return None;
        }
        self.plan.trial(self.next_index).map(|t| (self.next_index as u32, t))
    }

    pub fn results(&self) -> &[GenderTrialResult] {
        &self.results
    }

    pub fn test_results(&self) -> impl Iterator<Item = &GenderTrialResult> {
        self.results.iter().filter(|r| !r.training)
    }

    /// Test trials answered over the test block size.
    pub fn progress(&self) -> f64 {
        self.test_results().count() as f64 / self.plan.test.len() as f64
    }

    pub fn next_trial(&mut self) -> Result<(u32, GenderTrialPlan), ProtocolError> {
        if self.pending {
            return Err(ProtocolError::State("a trial is already pending".into()));
        }
        let trial = self.plan.trial(self.next_index).ok_or_else(|| ProtocolError::State("session finished".into()))?;
        self.pending = true;
        Ok((self.next_index as u32, trial.clone()))
    }

    pub fn submit(&mut self, response: GenderResponse) -> Result<GenderOutcome, ProtocolError> {
        if !self.pending {
            return Err(ProtocolError::State("no pending trial".into()));
        }
        let trial = self.plan.trial(self.next_index).expect("pending in range").clone();
        self.results.push(GenderTrialResult {
            trial_index: self.next_index as u32,
            training: self.next_index < self.plan.training.len(),
            trial,
            response,
        });
        self.pending = false;
        self.next_index += 1;
        Ok(GenderOutcome {
            trial_index: self.next_index as u32 - 1,
            feedback: FeedbackKind::None,
            session_finished: self.is_finished(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::staircase::TerminationReason;
    use crate::stimgen::INVENTORY_SIZE;

    fn run_always(correct_every: u32, seed: u64) -> VoiceCueRunner {
        let mut r = VoiceCueRunner::new(seed, INVENTORY_SIZE, false).unwrap();
        let mut k = 0;
        while !r.is_finished() {
            let t = r.next_trial().unwrap();
            k += 1;
            let answer = if k % correct_every == 0 { t.odd_interval % 3 + 1 } else { t.odd_interval };
            r.submit(answer).unwrap();
        }
        r
    }

    #[test]
    fn training_then_four_runs() {
        let r = run_always(3, 5);
        let training = r.training_result().unwrap();
        assert_eq!(training.trials.len(), 6);
        assert_eq!(training.termination, Some(TerminationReason::TrainingComplete));
        assert_eq!(r.run_results().len(), 4);
        assert!(r.run_results().iter().all(|res| res.termination.is_some()));
        assert_eq!(r.progress(), 1.0);
        assert!(matches!(r.clone().next_trial(), Err(ProtocolError::State(_))));
    }

    #[test]
    fn test_trials_never_reuse_training_triplets() {
        let mut r = VoiceCueRunner::new(11, INVENTORY_SIZE, false).unwrap();
        while !r.is_finished() {
            let t = r.next_trial().unwrap();
            if t.run_index > 0 {
                assert!(!r.training_triplets().contains(&t.syllables));
            }
            r.submit(t.odd_interval).unwrap();
        }
        assert_eq!(r.training_triplets().len(), 6);
    }

    #[test]
    fn one_pending_trial() {
        let mut r = VoiceCueRunner::new(1, INVENTORY_SIZE, false).unwrap();
        assert!(matches!(r.submit(1), Err(ProtocolError::State(_))));
        let t = r.next_trial().unwrap();
        assert!(matches!(r.next_trial(), Err(ProtocolError::State(_))));
        assert!(matches!(r.submit(4), Err(ProtocolError::Config(_))));
        assert_eq!(r.pending(), Some(&t));
        r.submit(t.odd_interval).unwrap();
        assert!(r.pending().is_none());
    }

    #[test]
    fn feedback_kinds() {
        for negative in [false, true] {
            let mut r = VoiceCueRunner::new(2, INVENTORY_SIZE, negative).unwrap();
            let t = r.next_trial().unwrap();
            assert_eq!(r.submit(t.odd_interval).unwrap().feedback, FeedbackKind::Positive);
            let t = r.next_trial().unwrap();
            let wrong = r.submit(t.odd_interval % 3 + 1).unwrap();
            assert!(!wrong.correct);
            let expected = if negative { FeedbackKind::Negative } else { FeedbackKind::None };
            assert_eq!(wrong.feedback, expected);
        }
    }

    #[test]
    fn runner_is_seed_deterministic() {
        let a = run_always(4, 9);
        let b = run_always(4, 9);
        assert_eq!(a.run_results(), b.run_results());
        assert_eq!(a.plan(), b.plan());
    }

    #[test]
    fn first_test_trial_uses_run_start_level() {
        let mut r = VoiceCueRunner::new(3, INVENTORY_SIZE, false).unwrap();
        for _ in 0..6 {
            let t = r.next_trial().unwrap();
            assert_eq!(t.run_index, 0);
            assert_eq!(t.step_st, 3.0);
            r.submit(t.odd_interval).unwrap();
        }
        let t = r.next_trial().unwrap();
        assert_eq!(t.run_index, 1);
        assert_eq!(t.delta_st, r.plan().runs[0].start_delta_st);
        assert_eq!(t.step_st, 2.0);
    }

    #[test]
    fn gender_block_flow() {
        let mut g = GenderRunner::new(7);
        assert_eq!(g.phase(), Phase::Training);
        let mut n = 0;
        while !g.is_finished() {
            let (i, t) = g.next_trial().unwrap();
            assert_eq!(i, n);
            assert!(g.next_trial().is_err());
            assert_eq!(g.pending().unwrap().1, &t);
            let out = g.submit(GenderResponse::Male).unwrap();
            assert_eq!(out.feedback, FeedbackKind::None);
            n += 1;
        }
        assert_eq!(n, 44);
        assert_eq!(g.test_results().count(), 36);
        assert!(g.submit(GenderResponse::Female).is_err());
    }
}
