use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::bundle::ResultBundle;
use super::store::{append_event, read_events, truncate_torn_tail, HarnessEvent, EVENTS_FILE, SESSIONS_DIR};
use super::{
    AudioRef, Choice, Experiment, HarnessError, ResponseMessage, SessionRecord, SessionState, SubmitOutcome,
    TrialMessage, UiHints,
};
use crate::protocol::{
    DiscriminationTrialPlan, FeedbackKind, GenderRunner, GenderTrialPlan, InterfaceProfile, Phase, ProfileSet,
    VoiceCueRunner,
};
use crate::stimgen::{
    content_hash, rms_equalize, sequence_duration_s, synth_sequence, triplet_duration_s, AudioBuffer, Inventory,
    ReferenceVoice, StimulusCache, SyllableSpec, VoiceTransform, DEFAULT_GAP_MS, DEFAULT_TARGET_RMS,
};

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub data_dir: PathBuf,
    /// Minimum time to produce each stimulus, emulating slow on-device processing.
    pub throttle_ms_per_stimulus: Option<u64>,
    pub cache_capacity: usize,
}

impl HarnessConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { data_dir: data_dir.into(), throttle_ms_per_stimulus: None, cache_capacity: 256 }
    }
}

#[allow(clippy::large_enum_variant)]
enum Runner {
    VoiceCue(VoiceCueRunner),
    Gender(GenderRunner),
}

impl Runner {
    fn phase(&self) -> Phase {
        match self {
            Runner::VoiceCue(r) => r.phase(),
            Runner::Gender(r) => r.phase(),
        }
    }

    fn progress(&self) -> f64 {
        match self {
            Runner::VoiceCue(r) => r.progress(),
            Runner::Gender(r) => r.progress(),
        }
    }
}

struct Session {
    record: SessionRecord,
    profile: InterfaceProfile,
    runner: Runner,
    events_path: PathBuf,
    pending: Option<TrialMessage>,
    early_responses: usize,
    aborted: bool,
}

impl Session {
    fn state(&self) -> SessionState {
        if self.aborted {
            SessionState::Aborted
        } else if self.record.trials_served == 0 {
            SessionState::Created
        } else {
            SessionState::from_phase(self.runner.phase())
        }
    }

    fn snapshot(&self) -> SessionRecord {
        SessionRecord { state: self.state(), ..self.record.clone() }
    }

    fn log(&self, event: &HarnessEvent) -> Result<(), HarnessError> {
        append_event(&self.events_path, event)
    }
}

#[derive(Serialize)]
struct SequenceRequest<'a> {
    voice: &'a ReferenceVoice,
    specs: &'a [SyllableSpec],
    transform: VoiceTransform,
    sample_rate_hz: u32,
    target_rms: f64,
}

/// Transport-free session service. Sessions are serialized individually;
/// different sessions proceed concurrently.
pub struct HarnessService {
    config: HarnessConfig,
    profiles: ProfileSet,
    inventory: Arc<Inventory>,
    cache: StimulusCache,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn wall_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl HarnessService {
    /// Open the data directory and resume every persisted session.
    pub fn open(config: HarnessConfig) -> Result<Self, HarnessError> {
        Self::with_profiles(config, ProfileSet::builtin(), Inventory::builtin())
    }

    pub fn with_profiles(config: HarnessConfig, profiles: ProfileSet, inventory: Inventory) -> Result<Self, HarnessError> {
        let sessions_dir = config.data_dir.join(SESSIONS_DIR);
        std::fs::create_dir_all(&sessions_dir)?;
        let cache = StimulusCache::with_dir(config.data_dir.join("audio"), config.cache_capacity)?;
        let service = Self {
            config,
            profiles,
            inventory: Arc::new(inventory),
            cache,
            sessions: Mutex::new(HashMap::new()),
        };
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&sessions_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(EVENTS_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let session = service.replay(&dir.join(EVENTS_FILE))?;
            let id = session.record.session_id.clone();
            service.sessions.lock().expect("sessions lock").insert(id, Arc::new(Mutex::new(session)));
        }
        Ok(service)
    }

    pub fn profiles(&self) -> &ProfileSet {
        &self.profiles
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.config.data_dir.join(SESSIONS_DIR).join(id)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, HarnessError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| HarnessError::NotFound(id.to_string()))
    }

    fn new_session(
        &self,
        session_id: String,
        experiment: Experiment,
        profile: &str,
        seed: u64,
        created_at_ms: u64,
        events_path: PathBuf,
    ) -> Result<Session, HarnessError> {
        let profile = self.profiles.get(profile).map_err(|e| HarnessError::Validation(e.to_string()))?.clone();
        let runner = match experiment {
            Experiment::VoiceCue => {
                Runner::VoiceCue(VoiceCueRunner::new(seed, self.inventory.len(), profile.negative_feedback)?)
            }
            Experiment::Gender => Runner::Gender(GenderRunner::new(seed)),
        };
        Ok(Session {
            record: SessionRecord {
                session_id,
                experiment,
                profile: profile.name.clone(),
                seed,
                state: SessionState::Created,
                created_at_ms,
                trials_served: 0,
            },
            profile,
            runner,
            events_path,
            pending: None,
            early_responses: 0,
            aborted: false,
        })
    }

    fn replay(&self, path: &Path) -> Result<Session, HarnessError> {
        truncate_torn_tail(path)?;
        let events = read_events(path)?;
        let mut iter = events.into_iter();
        let Some(HarnessEvent::Created { session_id, experiment, profile, seed, created_at_ms }) = iter.next() else {
            return Err(HarnessError::Corrupt(format!("{} does not start with a created event", path.display())));
        };
        let mut s = self.new_session(session_id, experiment, &profile, seed, created_at_ms, path.to_path_buf())?;
        let mut pending_synthesis_ms = None;
        for event in iter {
            match event {
                HarnessEvent::TrialServed { synthesis_ms, .. } => {
                    self.advance(&mut s)?;
                    pending_synthesis_ms = Some(synthesis_ms);
                }
                HarnessEvent::Response { choice, .. } => {
                    self.apply_choice(&mut s, choice)?;
                    pending_synthesis_ms = None;
                }
                HarnessEvent::EarlyResponse { .. } => s.early_responses += 1,
                HarnessEvent::Paused { .. } => {}
                HarnessEvent::Aborted { .. } => s.aborted = true,
                HarnessEvent::Created { .. } => {
                    return Err(HarnessError::Corrupt(format!("{}: repeated created event", path.display())))
                }
            }
        }
        if let Some(ms) = pending_synthesis_ms {
            let mut message = self.render_pending(&s)?;
            message.synthesis_ms = ms;
            s.pending = Some(message);
        }
        Ok(s)
    }

    pub fn create_session(
        &self,
        experiment: Experiment,
        profile: &str,
        seed: Option<u64>,
    ) -> Result<SessionRecord, HarnessError> {
        let seed = seed.unwrap_or_else(rand::random);
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.session_dir(&id);
        let session = self.new_session(id.clone(), experiment, profile, seed, wall_ms(), dir.join(EVENTS_FILE))?;
        std::fs::create_dir_all(&dir)?;
        session.log(&HarnessEvent::Created {
            session_id: id.clone(),
            experiment,
            profile: session.record.profile.clone(),
            seed,
            created_at_ms: session.record.created_at_ms,
        })?;
        let record = session.snapshot();
        self.sessions.lock().expect("sessions lock").insert(id, Arc::new(Mutex::new(session)));
        Ok(record)
    }

    pub fn record(&self, id: &str) -> Result<SessionRecord, HarnessError> {
        Ok(self.get(id)?.lock().expect("session lock").snapshot())
    }

    /// Draw the next trial from the state machine without rendering it.
    fn advance(&self, s: &mut Session) -> Result<(), HarnessError> {
        match &mut s.runner {
            Runner::VoiceCue(r) => {
                r.next_trial()?;
            }
            Runner::Gender(r) => {
                r.next_trial()?;
            }
        }
        s.record.trials_served += 1;
        Ok(())
    }

    fn apply_choice(&self, s: &mut Session, choice: Choice) -> Result<(FeedbackKind, Option<String>), HarnessError> {
        match (&mut s.runner, choice) {
            (Runner::VoiceCue(r), Choice::Interval(i)) => {
                let out = r.submit(i).map_err(|e| HarnessError::Validation(e.to_string()))?;
                Ok((out.feedback, out.encouragement))
            }
            (Runner::Gender(r), Choice::Gender(g)) => Ok((r.submit(g)?.feedback, None)),
            (Runner::VoiceCue(_), c) => Err(HarnessError::Validation(format!("expected interval 1-3, got {}", c.label()))),
            (Runner::Gender(_), c) => Err(HarnessError::Validation(format!("expected male or female, got {}", c.label()))),
        }
    }

    fn audio_ref(&self, hash: String, buf: &AudioBuffer) -> AudioRef {
        AudioRef { url: format!("/audio/{hash}.wav"), hash, duration_ms: buf.duration_s() * 1000.0 }
    }

    fn sequence_audio(&self, specs: &[SyllableSpec], transform: VoiceTransform) -> Result<AudioRef, HarnessError> {
        let inv = &self.inventory;
        let request = SequenceRequest {
            voice: &inv.voice,
            specs,
            transform,
            sample_rate_hz: inv.sample_rate_hz,
            target_rms: DEFAULT_TARGET_RMS,
        };
        let hash = content_hash(&request);
        let (buf, _) = self.cache.get_or_insert_with(&hash, || {
            let raw = synth_sequence(specs, &inv.voice, transform, inv.sample_rate_hz)?;
            Ok(rms_equalize(&raw, DEFAULT_TARGET_RMS)?.buffer)
        })?;
        Ok(self.audio_ref(hash, &buf))
    }

    /// One asset per interval; the two reference intervals share a hash.
    fn discrimination_audio(&self, plan: &DiscriminationTrialPlan) -> Result<(Vec<AudioRef>, f64), HarnessError> {
        let specs: Vec<SyllableSpec> = plan.syllables.iter().map(|id| self.inventory.spec(*id)).collect();
        let reference = self.sequence_audio(&specs, VoiceTransform::IDENTITY)?;
        let odd = self.sequence_audio(&specs, plan.transform())?;
        let audio = (1..=3u8).map(|i| if i == plan.odd_interval { odd.clone() } else { reference.clone() }).collect();
        let total_ms = triplet_duration_s(&specs, DEFAULT_GAP_MS, self.inventory.sample_rate_hz) * 1000.0;
        Ok((audio, total_ms))
    }

    fn gender_audio(&self, plan: &GenderTrialPlan) -> Result<(AudioRef, f64), HarnessError> {
        let ids = self
            .inventory
            .word(&plan.word)
            .ok_or_else(|| HarnessError::Validation(format!("word {:?} missing from inventory", plan.word)))?;
        let specs: Vec<SyllableSpec> = ids.iter().map(|id| self.inventory.spec(*id)).collect();
        let audio = self.sequence_audio(&specs, plan.transform())?;
        Ok((audio, sequence_duration_s(&specs, self.inventory.sample_rate_hz) * 1000.0))
    }

    fn render_pending(&self, s: &Session) -> Result<TrialMessage, HarnessError> {
        let p = &s.profile;
        let progress = p.shows_progress.then(|| s.runner.progress());
        let (index, audio, hints) = match &s.runner {
            Runner::VoiceCue(r) => {
                let plan = r.pending().ok_or_else(|| HarnessError::State("no pending trial".into()))?;
                let (audio, total_ms) = self.discrimination_audio(plan)?;
                let hints = UiHints {
                    phase: r.phase(),
                    response_enabled_after_ms: total_ms,
                    inter_stimulus_gap_ms: DEFAULT_GAP_MS,
                    mapping: None,
                    mapping_indication_ms: 0.0,
                    progress,
                    feedback_ms: p.feedback_s * 1000.0,
                    negative_feedback: p.negative_feedback,
                    choices: vec!["1".into(), "2".into(), "3".into()],
                };
                (r.trial_count(), audio, hints)
            }
            Runner::Gender(r) => {
                let (index, plan) = r.pending().ok_or_else(|| HarnessError::State("no pending trial".into()))?;
                let (audio, stim_ms) = self.gender_audio(plan)?;
                let indication_ms = p.mapping_indication_s * 1000.0;
                let hints = UiHints {
                    phase: r.phase(),
                    response_enabled_after_ms: indication_ms + stim_ms,
                    inter_stimulus_gap_ms: 0.0,
                    mapping: Some(plan.mapping),
                    mapping_indication_ms: indication_ms,
                    progress,
                    feedback_ms: 0.0,
                    negative_feedback: false,
                    choices: vec!["male".into(), "female".into()],
                };
                (index, vec![audio], hints)
            }
        };
        Ok(TrialMessage {
            session_id: s.record.session_id.clone(),
            trial_id: index.to_string(),
            index,
            experiment: s.record.experiment,
            audio,
            ui_hints: hints,
            synthesis_ms: 0.0,
        })
    }

    pub fn next_trial(&self, id: &str) -> Result<TrialMessage, HarnessError> {
        let session = self.get(id)?;
        let mut s = session.lock().expect("session lock");
        if s.aborted {
            return Err(HarnessError::State("session aborted".into()));
        }
        if s.pending.is_some() {
            return Err(HarnessError::Conflict("a trial is already pending".into()));
        }
        if s.runner.phase() == Phase::Finished {
            return Err(HarnessError::State("session finished".into()));
        }
        let started = Instant::now();
        self.advance(&mut s)?;
        let mut message = match self.render_pending(&s) {
            Ok(m) => m,
            Err(e) => {
                // keep memory consistent with the log, which has no record of this trial
                let replayed = self.replay(&s.events_path)?;
                *s = replayed;
                return Err(e);
            }
        };
        if let Some(per) = self.config.throttle_ms_per_stimulus {
            let n = match s.record.experiment {
                Experiment::VoiceCue => 3,
                Experiment::Gender => 1,
            };
            let floor = Duration::from_millis(per * n);
            if let Some(rest) = floor.checked_sub(started.elapsed()) {
                std::thread::sleep(rest);
            }
        }
        message.synthesis_ms = started.elapsed().as_secs_f64() * 1000.0;
        s.log(&HarnessEvent::TrialServed {
            trial_id: message.trial_id.clone(),
            index: message.index,
            synthesis_ms: message.synthesis_ms,
            wall_ms: wall_ms(),
        })?;
        s.pending = Some(message.clone());
        Ok(message)
    }

    /// The trial awaiting a response, if any; lets a client resume after a reconnect.
    pub fn pending(&self, id: &str) -> Result<Option<TrialMessage>, HarnessError> {
        Ok(self.get(id)?.lock().expect("session lock").pending.clone())
    }

    pub fn submit_response(&self, id: &str, response: ResponseMessage) -> Result<SubmitOutcome, HarnessError> {
        let session = self.get(id)?;
        let mut s = session.lock().expect("session lock");
        if s.aborted {
            return Err(HarnessError::State("session aborted".into()));
        }
        let Some(pending) = &s.pending else {
            return Err(HarnessError::Conflict(format!("no pending trial for response to {}", response.trial_id)));
        };
        if pending.trial_id != response.trial_id {
            return Err(HarnessError::Conflict(format!(
                "response to trial {} but trial {} is pending",
                response.trial_id, pending.trial_id
            )));
        }
        let kind_ok = matches!(
            (s.record.experiment, response.choice),
            (Experiment::VoiceCue, super::Choice::Interval(1..=3)) | (Experiment::Gender, super::Choice::Gender(_))
        );
        if !kind_ok {
            return Err(HarnessError::Validation(format!("invalid choice {}", response.choice.label())));
        }
        if !response.latency_ms.is_finite() || response.latency_ms < 0.0 {
            return Err(HarnessError::Validation(format!("invalid latency {}", response.latency_ms)));
        }
        let enabled_after_ms = pending.ui_hints.response_enabled_after_ms;
        if response.latency_ms < enabled_after_ms {
            s.log(&HarnessEvent::EarlyResponse {
                trial_id: response.trial_id.clone(),
                latency_ms: response.latency_ms,
                enabled_after_ms,
                wall_ms: wall_ms(),
            })?;
            s.early_responses += 1;
            return Err(HarnessError::EarlyResponse { latency_ms: response.latency_ms, enabled_after_ms });
        }
        // log first: a crash after this line replays the response
        s.log(&HarnessEvent::Response {
            trial_id: response.trial_id.clone(),
            choice: response.choice,
            latency_ms: response.latency_ms,
            client_timestamp: response.client_timestamp.clone(),
            wall_ms: wall_ms(),
        })?;
        let (feedback, encouragement) = self.apply_choice(&mut s, response.choice)?;
        s.pending = None;
        Ok(SubmitOutcome { trial_id: response.trial_id, feedback, encouragement, session_state: s.state() })
    }

    /// Record an experimenter pause; no timing policy is applied.
    pub fn pause(&self, id: &str) -> Result<SessionRecord, HarnessError> {
        let session = self.get(id)?;
        let s = session.lock().expect("session lock");
        if matches!(s.state(), SessionState::Finished | SessionState::Aborted) {
            return Err(HarnessError::State(format!("cannot pause a {:?} session", s.state())));
        }
        s.log(&HarnessEvent::Paused { wall_ms: wall_ms() })?;
        Ok(s.snapshot())
    }

    pub fn abort(&self, id: &str) -> Result<SessionRecord, HarnessError> {
        let session = self.get(id)?;
        let mut s = session.lock().expect("session lock");
        if matches!(s.state(), SessionState::Finished | SessionState::Aborted) {
            return Err(HarnessError::State(format!("cannot abort a {:?} session", s.state())));
        }
        s.log(&HarnessEvent::Aborted { wall_ms: wall_ms() })?;
        s.aborted = true;
        s.pending = None;
        Ok(s.snapshot())
    }

    /// Build the result bundle of a finished session and export it next to the log.
    pub fn results(&self, id: &str) -> Result<ResultBundle, HarnessError> {
        let session = self.get(id)?;
        let s = session.lock().expect("session lock");
        match s.state() {
            SessionState::Finished => {}
            other => return Err(HarnessError::State(format!("results need a finished session, state is {other:?}"))),
        }
        let r = &s.record;
        let bundle = match &s.runner {
            Runner::VoiceCue(runner) => ResultBundle::voice_cue(runner, &r.profile, r.seed, s.early_responses),
            Runner::Gender(runner) => ResultBundle::gender(runner, &r.profile, r.seed, s.early_responses),
        };
        let dir = self.session_dir(&r.session_id);
        std::fs::write(dir.join("results.json"), bundle.to_json_bytes())?;
        std::fs::write(dir.join("results.jsonl"), bundle.to_jsonl())?;
        for (name, text) in bundle.csv_tables(&r.session_id) {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(bundle)
    }

    pub fn audio_wav(&self, hash: &str) -> Result<Vec<u8>, HarnessError> {
        self.cache.wav_bytes(hash)?.ok_or_else(|| HarnessError::NotFound(format!("audio {hash}")))
    }

    pub fn events_path(&self, id: &str) -> Result<PathBuf, HarnessError> {
        Ok(self.get(id)?.lock().expect("session lock").events_path.clone())
    }
}
