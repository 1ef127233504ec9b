//! Adaptive 2-down-1-up track for three-interval forced-choice discrimination.
//!
//! The track moves the magnitude of the voice-cue difference (always > 0);
//! the sign of the presented difference is fixed by the run's start value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StaircaseError {
    #[error("invalid staircase configuration: {0}")]
    Config(String),
    #[error("run already terminated ({0:?})")]
    Terminated(TerminationReason),
    #[error("JND undefined: run ended with {0:?}")]
    JndUndefined(Option<TerminationReason>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ReversalsReached,
    MaxTrials,
    MaxConsecutiveIncorrect,
    TrainingComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Down,
    Up,
}

/// When the step size shrinks by `step_shrink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StepRule {
    /// Before a down-step, shrink while `magnitude <= proximity * step`; the
    /// step follows the level as it approaches zero.
    ShrinkNearZero { proximity: f64 },
    /// Shrink after every down-step. Total down-travel is then bounded by
    /// `initial_step / (1 - step_shrink)`.
    ShrinkEveryDownStep,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::ShrinkNearZero { proximity: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Test,
    /// Fixed number of trials, never yields a JND.
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseConfig {
    pub start_delta_st: f64,
    pub initial_step_st: f64,
    pub step_shrink: f64,
    pub step_rule: StepRule,
    pub n_down: u32,
    pub n_up: u32,
    pub reversal_target: usize,
    pub jnd_reversal_count: usize,
    pub max_trials: u32,
    pub max_consecutive_incorrect: u32,
    pub fixed_step_st: Option<f64>,
    pub mode: RunMode,
}

pub const TRAINING_STEP_ST: f64 = 3.0;
pub const TRAINING_TRIALS: u32 = 6;

impl StaircaseConfig {
    pub fn test(start_delta_st: f64) -> Self {
        Self {
            start_delta_st,
            initial_step_st: 2.0,
            step_shrink: std::f64::consts::FRAC_1_SQRT_2,
            step_rule: StepRule::default(),
            n_down: 2,
            n_up: 1,
            reversal_target: 8,
            jnd_reversal_count: 6,
            max_trials: 150,
            max_consecutive_incorrect: 15,
            fixed_step_st: None,
            mode: RunMode::Test,
        }
    }

    pub fn training(start_delta_st: f64) -> Self {
        Self {
            fixed_step_st: Some(TRAINING_STEP_ST),
            max_trials: TRAINING_TRIALS,
            mode: RunMode::Training,
            ..Self::test(start_delta_st)
        }
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<(), StaircaseError> {
        let bad = |m: &str| Err(StaircaseError::Config(m.to_string()));
        if !(self.start_delta_st.is_finite() && self.start_delta_st != 0.0) {
            return bad("start_delta_st must be finite and non-zero");
        }
        if !(self.initial_step_st > 0.0 && self.initial_step_st.is_finite()) {
            return bad("initial_step_st must be positive");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if let StepRule::ShrinkNearZero { proximity } = self.step_rule {
            if !(proximity >= 1.0 && proximity.is_finite()) {
                return bad("proximity must be >= 1");
            }
        }
        if self.n_down == 0 || self.n_up == 0 {
            return bad("n_down and n_up must be positive");
        }
        if self.jnd_reversal_count == 0 || self.jnd_reversal_count > self.reversal_target {
            return bad("jnd_reversal_count must lie in 1..=reversal_target");
        }
        if self.max_trials == 0 || self.max_consecutive_incorrect == 0 {
            return bad("trial limits must be positive");
        }
        if let Some(s) = self.fixed_step_st {
            if !(s > 0.0 && s.is_finite()) {
                return bad("fixed_step_st must be positive");
            }
        }
        Ok(())
    }
}

/// One trial as seen by the track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based.
    pub trial_index: u32,
    /// Presented magnitude (before the update this trial triggers).
    pub magnitude_st: f64,
    pub step_st: f64,
    pub correct: bool,
    pub is_reversal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StaircaseEvent {
    LevelMoved { direction: Move, from_st: f64, to_st: f64 },
    Reversal { count: usize, magnitude_st: f64 },
    Terminated(TerminationReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseState {
    config: StaircaseConfig,
    direction_sign: f64,
    magnitude_st: f64,
    current_step_st: f64,
    consecutive_correct: u32,
    consecutive_incorrect: u32,
    last_move: Option<Move>,
    reversal_magnitudes: Vec<f64>,
    trial_index: u32,
    step_shrinks: u32,
    termination: Option<TerminationReason>,
    history: Vec<StepRecord>,
}

pub fn init_run(config: StaircaseConfig) -> Result<StaircaseState, StaircaseError> {
    StaircaseState::new(config)
}

impl StaircaseState {
    pub fn new(config: StaircaseConfig) -> Result<Self, StaircaseError> {
        config.validate()?;
        Ok(Self {
            direction_sign: config.start_delta_st.signum(),
            magnitude_st: config.start_delta_st.abs(),
            current_step_st: config.fixed_step_st.unwrap_or(config.initial_step_st),
            consecutive_correct: 0,
            consecutive_incorrect: 0,
            last_move: None,
            reversal_magnitudes: Vec::new(),
            trial_index: 0,
            step_shrinks: 0,
            termination: None,
            history: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &StaircaseConfig {
        &self.config
    }

    pub fn direction_sign(&self) -> f64 {
        self.direction_sign
    }

    pub fn magnitude_st(&self) -> f64 {
        self.magnitude_st
    }

    /// Signed difference to present on the next trial.
    pub fn level_st(&self) -> f64 {
        self.direction_sign * self.magnitude_st
    }

    pub fn current_step_st(&self) -> f64 {
        self.current_step_st
    }

    pub fn step_shrinks(&self) -> u32 {
        self.step_shrinks
    }

    pub fn consecutive_incorrect(&self) -> u32 {
        self.consecutive_incorrect
    }

    pub fn last_move(&self) -> Option<Move> {
        self.last_move
    }

    pub fn reversal_magnitudes(&self) -> &[f64] {
        &self.reversal_magnitudes
    }

    pub fn trial_index(&self) -> u32 {
        self.trial_index
    }

    pub fn termination(&self) -> Option<TerminationReason> {
        self.termination
    }

    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    fn is_fixed(&self) -> bool {
        self.config.fixed_step_st.is_some()
    }

    fn shrink_step(&mut self) {
        self.current_step_st *= self.config.step_shrink;
        self.step_shrinks += 1;
    }

    pub fn record_response(&mut self, correct: bool) -> Result<Vec<StaircaseEvent>, StaircaseError> {
        if let Some(reason) = self.termination {
            return Err(StaircaseError::Terminated(reason));
        }
        self.trial_index += 1;
        let presented = self.magnitude_st;
        let step_before = self.current_step_st;
        let mut events = Vec::new();

        let mv = if correct {
            self.consecutive_incorrect = 0;
            self.consecutive_correct += 1;
            (self.consecutive_correct >= self.config.n_down).then_some(Move::Down)
        } else {
            self.consecutive_correct = 0;
            self.consecutive_incorrect += 1;
            self.consecutive_incorrect.is_multiple_of(self.config.n_up).then_some(Move::Up)
        };

        let mut is_reversal = false;
        if let Some(mv) = mv {
            if self.last_move.is_some_and(|last| last != mv) {
                is_reversal = true;
                self.reversal_magnitudes.push(presented);
                events.push(StaircaseEvent::Reversal { count: self.reversal_magnitudes.len(), magnitude_st: presented });
            }
            match mv {
                Move::Down => {
                    if !self.is_fixed() {
                        if let StepRule::ShrinkNearZero { proximity } = self.config.step_rule {
                            while self.magnitude_st <= proximity * self.current_step_st {
                                self.shrink_step();
                            }
                        }
                    }
                    let next = self.magnitude_st - self.current_step_st;
                    self.magnitude_st = if next > 0.0 { next } else { self.magnitude_st / 2.0 };
                    if !self.is_fixed() && self.config.step_rule == StepRule::ShrinkEveryDownStep {
                        self.shrink_step();
                    }
                    self.consecutive_correct = 0;
                }
                Move::Up => {
                    self.magnitude_st += self.current_step_st;
                }
            }
            self.last_move = Some(mv);
            events.push(StaircaseEvent::LevelMoved { direction: mv, from_st: presented, to_st: self.magnitude_st });
        }

        self.history.push(StepRecord {
            trial_index: self.trial_index,
            magnitude_st: presented,
            step_st: step_before,
            correct,
            is_reversal,
        });

        let reason = if self.consecutive_incorrect >= self.config.max_consecutive_incorrect {
            Some(TerminationReason::MaxConsecutiveIncorrect)
        } else if self.trial_index >= self.config.max_trials {
            Some(match self.config.mode {
                RunMode::Test => TerminationReason::MaxTrials,
                RunMode::Training => TerminationReason::TrainingComplete,
            })
        } else if self.config.mode == RunMode::Test && self.reversal_magnitudes.len() >= self.config.reversal_target {
            Some(TerminationReason::ReversalsReached)
        } else {
            None
        };
        if let Some(r) = reason {
            self.termination = Some(r);
            events.push(StaircaseEvent::Terminated(r));
        }
        Ok(events)
    }

    pub fn jnd_estimate(&self) -> Result<f64, StaircaseError> {
        jnd_estimate(self)
    }

    pub fn result(&self) -> RunResult {
        RunResult {
            jnd_st: self.jnd_estimate().ok(),
            termination: self.termination,
            trials: self.history.clone(),
            reversal_magnitudes: self.reversal_magnitudes.clone(),
        }
    }
}

/// Mean of the last `jnd_reversal_count` reversal magnitudes.
pub fn jnd_estimate(state: &StaircaseState) -> Result<f64, StaircaseError> {
    if state.termination != Some(TerminationReason::ReversalsReached) {
        return Err(StaircaseError::JndUndefined(state.termination));
    }
    mean_of_last(&state.reversal_magnitudes, state.config.jnd_reversal_count)
        .ok_or(StaircaseError::JndUndefined(state.termination))
}

pub(crate) fn mean_of_last(values: &[f64], k: usize) -> Option<f64> {
    if k == 0 || values.len() < k {
        return None;
    }
    let tail = &values[values.len() - k..];
    Some(tail.iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub jnd_st: Option<f64>,
    pub termination: Option<TerminationReason>,
    pub trials: Vec<StepRecord>,
    pub reversal_magnitudes: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn feed(state: &mut StaircaseState, seq: &str) {
        for c in seq.chars() {
            state.record_response(c == 'C').unwrap();
        }
    }

    #[test]
    fn init_examples() {
        let s = init_run(StaircaseConfig::test(-12.0)).unwrap();
        assert_eq!(s.magnitude_st(), 12.0);
        assert_eq!(s.direction_sign(), -1.0);
        assert_eq!(s.current_step_st(), 2.0);
        let s = init_run(StaircaseConfig::test(3.8)).unwrap();
        assert_eq!((s.magnitude_st(), s.direction_sign()), (3.8, 1.0));
        let s = init_run(StaircaseConfig::training(5.0)).unwrap();
        assert_eq!(s.current_step_st(), 3.0);
        assert!(s.termination().is_none());
    }

    #[test]
    fn invalid_configs() {
        assert!(init_run(StaircaseConfig::test(0.0)).is_err());
        let mut c = StaircaseConfig::test(1.0);
        c.step_shrink = 1.0;
        assert!(init_run(c).is_err());
        let mut c = StaircaseConfig::test(1.0);
        c.jnd_reversal_count = 9;
        assert!(init_run(c).is_err());
        let mut c = StaircaseConfig::test(1.0);
        c.initial_step_st = -2.0;
        assert!(init_run(c).is_err());
    }

    #[test]
    fn hand_trace_every_down_step_rule() {
        let cfg = StaircaseConfig::test(-12.0).with_step_rule(StepRule::ShrinkEveryDownStep);
        let mut s = init_run(cfg).unwrap();
        feed(&mut s, "CC");
        assert_relative_eq!(s.magnitude_st(), 10.0);
        assert_relative_eq!(s.current_step_st(), 2.0 / 2f64.sqrt(), epsilon = 1e-12);
        feed(&mut s, "CC");
        assert_relative_eq!(s.magnitude_st(), 8.58579, epsilon = 1e-5);
        assert_relative_eq!(s.current_step_st(), 1.0, epsilon = 1e-12);
        let ev = s.record_response(false).unwrap();
        assert_relative_eq!(s.magnitude_st(), 9.58579, epsilon = 1e-5);
        assert_relative_eq!(s.current_step_st(), 1.0, epsilon = 1e-12);
        assert_eq!(s.reversal_magnitudes().len(), 1);
        assert_relative_eq!(s.reversal_magnitudes()[0], 8.58579, epsilon = 1e-5);
        assert!(matches!(ev[0], StaircaseEvent::Reversal { count: 1, .. }));
    }

    #[test]
    fn hand_trace_near_zero_rule() {
        // 12 -> 10 -> 8 -> 6; at 4 the step shrinks to sqrt(2) first (4 <= 2*2), then 4-1.41421
        let mut s = init_run(StaircaseConfig::test(-12.0)).unwrap();
        feed(&mut s, "CCCCCC");
        assert_relative_eq!(s.magnitude_st(), 6.0);
        assert_relative_eq!(s.current_step_st(), 2.0);
        feed(&mut s, "CC");
        assert_relative_eq!(s.magnitude_st(), 4.0);
        feed(&mut s, "CC");
        assert_relative_eq!(s.current_step_st(), std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(s.magnitude_st(), 4.0 - std::f64::consts::SQRT_2, epsilon = 1e-12);
        feed(&mut s, "W");
        assert_relative_eq!(s.reversal_magnitudes()[0], 4.0 - std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(s.magnitude_st(), 4.0, epsilon = 1e-12);
        assert_eq!(s.level_st(), -s.magnitude_st());
    }

    #[test]
    fn incorrect_keeps_step_and_first_move_is_not_a_reversal() {
        let mut s = init_run(StaircaseConfig::test(5.0)).unwrap();
        s.record_response(false).unwrap();
        assert_eq!(s.magnitude_st(), 7.0);
        assert_eq!(s.current_step_st(), 2.0);
        assert!(s.reversal_magnitudes().is_empty());
        // W then CC: down after an up is a reversal at the presented level
        feed(&mut s, "CC");
        assert_eq!(s.reversal_magnitudes(), &[7.0]);
    }

    #[test]
    fn fifteen_incorrect_terminates_without_jnd() {
        let mut s = init_run(StaircaseConfig::test(-7.0)).unwrap();
        feed(&mut s, "CCWC");
        for _ in 0..15 {
            s.record_response(false).unwrap();
        }
        assert_eq!(s.termination(), Some(TerminationReason::MaxConsecutiveIncorrect));
        assert!(matches!(s.jnd_estimate(), Err(StaircaseError::JndUndefined(_))));
        assert!(matches!(s.record_response(true), Err(StaircaseError::Terminated(_))));
    }

    #[test]
    fn max_trials_without_eight_reversals() {
        let mut s = init_run(StaircaseConfig::test(3.8)).unwrap();
        // long alternation of C,W never completes a down-step: no moves down, so no reversals
        for i in 0..150 {
            let correct = i % 2 == 0;
            if s.is_terminated() {
                break;
            }
            s.record_response(correct).unwrap();
        }
        assert_eq!(s.trial_index(), 150);
        assert_eq!(s.termination(), Some(TerminationReason::MaxTrials));
        assert!(s.result().jnd_st.is_none());
    }

    #[test]
    fn seven_reversals_then_max_trials_is_an_error() {
        let mut cfg = StaircaseConfig::test(3.0);
        cfg.max_trials = 12;
        let mut s = init_run(cfg).unwrap();
        feed(&mut s, "CCWCCWCCWCCW");
        assert_eq!(s.reversal_magnitudes().len(), 7);
        assert_eq!(s.termination(), Some(TerminationReason::MaxTrials));
        assert!(s.jnd_estimate().is_err());
    }

    #[test]
    fn eighth_reversal_terminates_with_jnd() {
        let mut s = init_run(StaircaseConfig::test(3.0)).unwrap();
        feed(&mut s, "CCWCCWCCWCCWC");
        assert_eq!(s.reversal_magnitudes().len(), 7);
        assert!(!s.is_terminated());
        feed(&mut s, "C");
        assert_eq!(s.reversal_magnitudes().len(), 8);
        assert_eq!(s.termination(), Some(TerminationReason::ReversalsReached));
        let r = s.reversal_magnitudes();
        let want = r[2..].iter().sum::<f64>() / 6.0;
        assert_relative_eq!(s.jnd_estimate().unwrap(), want);
    }

    #[test]
    fn jnd_arithmetic() {
        let m = mean_of_last(&[8.6, 9.6, 7.9, 8.4, 7.7, 8.1, 7.6, 7.9], 6).unwrap();
        // (7.9 + 8.4 + 7.7 + 8.1 + 7.6 + 7.9) / 6 = 47.6 / 6
        assert_relative_eq!(m, 7.933_333_333_333_333, epsilon = 1e-12);
        assert!((m - 7.93).abs() < 0.005);
        assert_eq!(mean_of_last(&[2.0; 8], 6), Some(2.0));
        assert_eq!(mean_of_last(&[2.0; 5], 6), None);
    }

    #[test]
    fn training_runs_six_trials() {
        let mut s = init_run(StaircaseConfig::training(-12.0)).unwrap();
        feed(&mut s, "CCCCCC");
        assert_eq!(s.termination(), Some(TerminationReason::TrainingComplete));
        assert_eq!(s.magnitude_st(), 3.0);
        assert_eq!(s.current_step_st(), 3.0);
        assert!(s.result().jnd_st.is_none());
        // fixed step with positivity clamp
        let mut s = init_run(StaircaseConfig::training(3.8)).unwrap();
        feed(&mut s, "CCCC");
        assert_relative_eq!(s.magnitude_st(), 0.4, epsilon = 1e-12);
    }

    fn responses() -> impl Strategy<Value = Vec<bool>> {
        prop::collection::vec(any::<bool>(), 1..200)
    }

    fn run(cfg: StaircaseConfig, seq: &[bool]) -> StaircaseState {
        let mut s = init_run(cfg).unwrap();
        for &c in seq {
            if s.is_terminated() {
                break;
            }
            s.record_response(c).unwrap();
        }
        s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn magnitude_stays_positive(seq in responses(), start in prop::sample::select(vec![-12.0, 5.0, 3.8, -7.0]), every in any::<bool>()) {
            let mut cfg = StaircaseConfig::test(start);
            if every { cfg.step_rule = StepRule::ShrinkEveryDownStep; }
            let mut s = init_run(cfg).unwrap();
            for &c in &seq {
                if s.is_terminated() { break; }
                s.record_response(c).unwrap();
                prop_assert!(s.magnitude_st() > 0.0);
            }
        }

        #[test]
        fn step_is_geometric_and_non_increasing(seq in responses(), every in any::<bool>()) {
            let mut cfg = StaircaseConfig::test(-12.0);
            if every { cfg.step_rule = StepRule::ShrinkEveryDownStep; }
            let mut s = init_run(cfg).unwrap();
            let mut prev = s.current_step_st();
            let mut downs = 0;
            for &c in &seq {
                if s.is_terminated() { break; }
                let ev = s.record_response(c).unwrap();
                downs += ev.iter().filter(|e| matches!(e, StaircaseEvent::LevelMoved { direction: Move::Down, .. })).count() as i32;
                prop_assert!(s.current_step_st() <= prev);
                prev = s.current_step_st();
                let want = 2.0 * std::f64::consts::FRAC_1_SQRT_2.powi(s.step_shrinks() as i32);
                prop_assert!((s.current_step_st() - want).abs() < 1e-12);
                if every { prop_assert_eq!(s.step_shrinks() as i32, downs); }
            }
        }

        #[test]
        fn reversals_equal_direction_flips(seq in responses()) {
            let s = run(StaircaseConfig::test(5.0), &seq);
            let mut moves = Vec::new();
            let mut replay = init_run(StaircaseConfig::test(5.0)).unwrap();
            for &c in seq.iter().take(s.trial_index() as usize) {
                for e in replay.record_response(c).unwrap() {
                    if let StaircaseEvent::LevelMoved { direction, .. } = e { moves.push(direction); }
                }
            }
            let flips = moves.windows(2).filter(|w| w[0] != w[1]).count();
            prop_assert_eq!(flips, s.reversal_magnitudes().len());
            prop_assert!(s.reversal_magnitudes().len() <= 8);
            if s.termination() == Some(TerminationReason::ReversalsReached) {
                prop_assert_eq!(s.reversal_magnitudes().len(), 8);
                prop_assert!(s.history().last().unwrap().is_reversal);
            }
            prop_assert_eq!(replay, s);
        }

        #[test]
        fn frozen_after_termination(seq in responses()) {
            let mut s = run(StaircaseConfig::test(-7.0), &seq);
            if s.is_terminated() {
                let before = s.clone();
                prop_assert!(s.record_response(true).is_err());
                prop_assert_eq!(before, s);
            }
        }
    }

    #[test]
    fn positivity_fuzz_1e5() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for i in 0..100_000 {
            let start = [-12.0, 5.0, 3.8, -7.0][i % 4];
            let mut s = init_run(StaircaseConfig::test(start)).unwrap();
            let p: f64 = rng.random();
            while !s.is_terminated() {
                s.record_response(rng.random::<f64>() < p).unwrap();
                assert!(s.magnitude_st() > 0.0);
            }
        }
    }
}
