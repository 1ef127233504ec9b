//! `simulate`: batch sessions for a cohort of simulated listeners.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use voicecue_core::analysis::tables::write_csv;
use voicecue_core::harness::Experiment;
use voicecue_core::listenersim::{Cohort, SimParticipant};
use voicecue_core::protocol::{
    derive_seed, simulate_session_duration, ProfileSet, SessionPlan, SimulatedResponder,
};
use voicecue_core::stimgen::Inventory;

use crate::logs::{cue_weight_rows, jnd_rows, write_lines, TrialKind, TrialLine};

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub experiment: Experiment,
    pub profiles: Vec<String>,
    pub cohort: Option<PathBuf>,
    /// Default cohort size when no cohort file is given.
    pub participants: usize,
    /// Sessions per participant and profile.
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub profile_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DurationRow {
    pub participant: String,
    pub interface: String,
    pub experiment: String,
    pub session_seed: u64,
    pub n_trials: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SimulateSummary {
    pub sessions: usize,
    pub files: Vec<PathBuf>,
    pub fit_failures: Vec<String>,
}

pub fn load_cohort(path: Option<&Path>, n: usize) -> Result<Vec<SimParticipant>> {
    Ok(match path {
        Some(p) => Cohort::from_path(p)?.participants,
        None => Cohort::uniform(n, SimParticipant::default()).participants,
    })
}

pub fn load_profiles(path: Option<&Path>) -> Result<ProfileSet> {
    Ok(match path {
        Some(p) => ProfileSet::from_path(p)?,
        None => ProfileSet::builtin(),
    })
}

pub fn simulate(opts: &SimulateOptions) -> Result<SimulateSummary> {
    let participants = load_cohort(opts.cohort.as_deref(), opts.participants)?;
    let profiles = load_profiles(opts.profile_file.as_deref())?;
    let inventory = Inventory::builtin();
    let experiment = match opts.experiment {
        Experiment::VoiceCue => "voice_cue",
        Experiment::Gender => "gender",
    };
    let logs_dir = opts.out.join("logs");
    std::fs::create_dir_all(&logs_dir).with_context(|| format!("creating {}", logs_dir.display()))?;

    let mut lines = Vec::new();
    let mut durations = Vec::new();
    let mut summary = SimulateSummary::default();
    for profile_name in &opts.profiles {
        let profile = profiles.get(profile_name)?;
        for p in &participants {
            for run in 0..opts.runs {
                let session_seed = derive_seed(opts.seed, &format!("{experiment}/{}/{profile_name}/{run}", p.id));
                let plan = match opts.experiment {
                    Experiment::VoiceCue => SessionPlan::VoiceCue { seed: session_seed },
                    Experiment::Gender => SessionPlan::Gender { seed: session_seed },
                };
                let mut responder = SimulatedResponder::new(p.clone(), derive_seed(session_seed, "responder"));
                let (seconds, log) = simulate_session_duration(&plan, profile, &inventory, &mut responder)?;
                let log_path = logs_dir.join(format!("{}_{profile_name}_{run}.jsonl", p.id));
                std::fs::write(&log_path, log.to_jsonl())?;
                let line = |trial| TrialLine {
                    participant: p.id.clone(),
                    interface: profile_name.clone(),
                    session_seed,
                    trial,
                };
                let n_trials = log.trials.len() + log.gender_trials.len();
                lines.extend(log.trials.into_iter().map(|t| line(TrialKind::VoiceCue(t))));
                lines.extend(log.gender_trials.into_iter().map(|t| line(TrialKind::Gender(t))));
                durations.push(DurationRow {
                    participant: p.id.clone(),
                    interface: profile_name.clone(),
                    experiment: experiment.into(),
                    session_seed,
                    n_trials,
                    duration_s: seconds,
                });
                summary.sessions += 1;
            }
        }
    }

    let trials_path = opts.out.join("trials.jsonl");
    write_lines(&trials_path, &lines)?;
    summary.files.push(trials_path);
    let durations_path = opts.out.join("durations.csv");
    write_csv(std::fs::File::create(&durations_path)?, &durations)?;
    summary.files.push(durations_path);
    match opts.experiment {
        Experiment::VoiceCue => {
            let path = opts.out.join("jnds.csv");
            write_csv(std::fs::File::create(&path)?, &jnd_rows(&lines)?)?;
            summary.files.push(path);
        }
        Experiment::Gender => {
            let (rows, failures) = cue_weight_rows(&lines);
            let path = opts.out.join("cue_weights.csv");
            write_csv(std::fs::File::create(&path)?, &rows)?;
            summary.files.push(path);
            summary.fit_failures = failures;
        }
    }
    Ok(summary)
}
