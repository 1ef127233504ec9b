//! Session-duration simulation on a microsecond event clock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::log::{EventKind, GenderTrialRecord, SessionLog, TrialRecord};
use super::plan::{DiscriminationTrialPlan, GenderTrialPlan};
use super::profile::{InterfaceProfile, ResponseTimeModel};
use super::session::{FeedbackKind, GenderRunner, VoiceCueRunner};
use super::{derive_seed, ProtocolError};
use crate::analysis::normalize_cues;
use crate::listenersim::{GenderResponse, SimParticipant};
use crate::stimgen::{sequence_duration_s, triplet_duration_s, Inventory, StimError, DEFAULT_GAP_MS};

/// Anything that can answer trials: a simulated listener or a scripted client.
pub trait Responder {
    /// 1-based interval chosen as the odd one.
    fn discriminate(&mut self, trial: &DiscriminationTrialPlan) -> u8;
    fn categorise(&mut self, trial: &GenderTrialPlan) -> GenderResponse;
    /// Time from response enablement to the response.
    fn latency_s(&mut self, model: &ResponseTimeModel) -> f64;
}

/// Answers from a [`SimParticipant`]; answers and latencies use separate
/// streams so changing the latency model never changes the answers.
#[derive(Debug, Clone)]
pub struct SimulatedResponder {
    pub participant: SimParticipant,
    answer_rng: ChaCha8Rng,
    latency_rng: ChaCha8Rng,
}

impl SimulatedResponder {
    pub fn new(participant: SimParticipant, seed: u64) -> Self {
        Self {
            participant,
            answer_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "answers")),
            latency_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "latency")),
        }
    }
}

impl Responder for SimulatedResponder {
    fn discriminate(&mut self, trial: &DiscriminationTrialPlan) -> u8 {
        let correct = self
            .participant
            .discrimination
            .respond_3afc(trial.delta_st, &mut self.answer_rng)
            .unwrap_or(false);
        if correct {
            trial.odd_interval
        } else {
            // one of the two standard intervals
            let k = self.answer_rng.random_range(1..=2u8);
            (trial.odd_interval - 1 + k) % 3 + 1
        }
    }

    fn categorise(&mut self, trial: &GenderTrialPlan) -> GenderResponse {
        let (f, v) = normalize_cues(trial.d_f0_st, trial.d_vtl_st);
        self.participant.categorisation.respond_gender(f, v, &mut self.answer_rng)
    }

    fn latency_s(&mut self, model: &ResponseTimeModel) -> f64 {
        model.sample(&mut self.latency_rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "experiment")]
pub enum SessionPlan {
    VoiceCue { seed: u64 },
    Gender { seed: u64 },
}

impl SessionPlan {
    pub fn seed(&self) -> u64 {
        match *self {
            SessionPlan::VoiceCue { seed } | SessionPlan::Gender { seed } => seed,
        }
    }
}

/// Run a whole session against `responder` and log every event. The returned
/// seconds equal the sum of logged event durations.
pub fn simulate_session_duration(
    plan: &SessionPlan,
    profile: &InterfaceProfile,
    inventory: &Inventory,
    responder: &mut dyn Responder,
) -> Result<(f64, SessionLog), ProtocolError> {
    profile.validate()?;
    let mut log = SessionLog::new();
    let mut break_rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed(), "breaks"));
    match *plan {
        SessionPlan::VoiceCue { seed } => {
            let mut runner = VoiceCueRunner::new(seed, inventory.len(), profile.negative_feedback)?;
            let mut current_run = None;
            while !runner.is_finished() {
                let t = runner.next_trial()?;
                if current_run != Some(t.run_index) {
                    if current_run.is_some() {
                        log.push_s(EventKind::Break, None, profile.break_policy.sample(&mut break_rng));
                    }
                    log.push(EventKind::RunBoundary { run_index: t.run_index, label: t.run.label() }, None, 0);
                    current_run = Some(t.run_index);
                }
                let i = runner.trial_count();
                let specs = t.syllables.map(|id| inventory.spec(id));
                log.push_s(EventKind::Processing, Some(i), 3.0 * profile.per_stimulus_processing_s);
                log.push_s(
                    EventKind::StimulusStart,
                    Some(i),
                    triplet_duration_s(&specs, DEFAULT_GAP_MS, inventory.sample_rate_hz),
                );
                log.push(EventKind::StimulusEnd, Some(i), 0);
                log.push(EventKind::ResponseEnabled, Some(i), 0);
                let choice = responder.discriminate(&t);
                let responded_at = log.now_us();
                log.push_s(EventKind::Response { choice: choice.to_string() }, Some(i), responder.latency_s(&profile.response_time));
                let out = runner.submit(choice)?;
                let feedback_s = if out.feedback == FeedbackKind::None { 0.0 } else { profile.feedback_s };
                log.push_s(EventKind::Feedback { kind: out.feedback }, Some(i), feedback_s);
                if let Some(message) = &out.encouragement {
                    log.push(EventKind::Encouragement { message: message.clone() }, Some(i), 0);
                }
                log.trials.push(TrialRecord {
                    trial_index: i,
                    run_index: t.run_index,
                    run: t.run,
                    trial_in_run: t.trial_in_run,
                    syllables: t.syllables,
                    delta_st: t.delta_st,
                    step_st: t.step_st,
                    odd_interval: t.odd_interval,
                    response: choice,
                    correct: out.correct,
                    is_reversal: out.is_reversal,
                    timestamp_us: responded_at,
                });
            }
        }
        SessionPlan::Gender { seed } => {
            let mut runner = GenderRunner::new(seed);
            while !runner.is_finished() {
                let (i, t) = runner.next_trial()?;
                let ids = inventory
                    .word(&t.word)
                    .ok_or_else(|| StimError::InvalidSpec(format!("unknown word {:?}", t.word)))?;
                let specs: Vec<_> = ids.iter().map(|id| inventory.spec(*id)).collect();
                log.push_s(EventKind::MappingIndication { male: t.mapping.male }, Some(i), profile.mapping_indication_s);
                log.push_s(EventKind::StimulusStart, Some(i), sequence_duration_s(&specs, inventory.sample_rate_hz));
                log.push(EventKind::StimulusEnd, Some(i), 0);
                log.push(EventKind::ResponseEnabled, Some(i), 0);
                let response = responder.categorise(&t);
                let responded_at = log.now_us();
                let choice = serde_json::to_value(response).expect("serializes");
                log.push_s(
                    EventKind::Response { choice: choice.as_str().unwrap_or_default().to_string() },
                    Some(i),
                    responder.latency_s(&profile.response_time),
                );
                let out = runner.submit(response)?;
                log.push(EventKind::Feedback { kind: out.feedback }, Some(i), 0);
                log.gender_trials.push(GenderTrialRecord {
                    trial_index: i,
                    training: (i as usize) < runner.plan().training.len(),
                    word: t.word.clone(),
                    d_f0_st: t.d_f0_st,
                    d_vtl_st: t.d_vtl_st,
                    male_hand: t.mapping.male,
                    response,
                    timestamp_us: responded_at,
                });
            }
        }
    }
    log.push(EventKind::SessionEnd, None, 0);
    Ok((log.total_s(), log))
}

/// Mean simulated duration over `sessions`; responder streams are derived
/// from each plan's seed so repeated calls reuse the same random numbers.
pub fn mean_session_duration(
    sessions: &[(SessionPlan, SimParticipant)],
    profile: &InterfaceProfile,
    inventory: &Inventory,
) -> Result<f64, ProtocolError> {
    if sessions.is_empty() {
        return Err(ProtocolError::Config("no sessions to simulate".into()));
    }
    let mut total = 0.0;
    for (plan, participant) in sessions {
        let mut responder = SimulatedResponder::new(participant.clone(), derive_seed(plan.seed(), "responder"));
        total += simulate_session_duration(plan, profile, inventory, &mut responder)?.0;
    }
    Ok(total / sessions.len() as f64)
}

/// Find the response-time mean at which `mean_duration` hits `target_s`.
/// `mean_duration` must be non-decreasing in the mean (true under common
/// random numbers, where latencies scale linearly with it).
pub fn calibrate_response_mean<F>(target_s: f64, mut mean_duration: F) -> Result<f64, ProtocolError>
where
    F: FnMut(f64) -> Result<f64, ProtocolError>,
{
    let floor = mean_duration(0.0)?;
    if floor > target_s {
        return Err(ProtocolError::Calibration(format!(
            "target {target_s} s is below the zero-latency duration {floor} s"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while mean_duration(hi)? < target_s {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 40 {
            return Err(ProtocolError::Calibration(format!("target {target_s} s not reached")));
        }
    }
    for _ in 0..100 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mean_duration(mid)? < target_s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
