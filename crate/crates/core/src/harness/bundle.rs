use serde::{Deserialize, Serialize};

use super::Experiment;
use crate::analysis::tables::{to_csv_string, CueWeightRow, GenderTrialRow, JndRow};
use crate::analysis::{fit_logistic_weights, normalize_cues, CueWeights, GenderObservation};
use crate::protocol::{Cue, GenderRunner, VoiceCueRunner};
use crate::stimgen::SyllableId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// 1..=4 in presentation order.
    pub run_index: usize,
    pub cue: Cue,
    pub start_delta_st: f64,
    pub jnd_st: Option<f64>,
    pub termination: String,
    pub n_trials: usize,
    pub reversal_magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationRow {
    pub run_index: usize,
    pub trial_in_run: u32,
    pub syllables: [SyllableId; 3],
    pub magnitude_st: f64,
    pub step_st: f64,
    pub correct: bool,
    pub is_reversal: bool,
}

/// Session results without session id or wall-clock data, so a fixed seed
/// and response script always give the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub experiment: Experiment,
    pub profile: String,
    pub seed: u64,
    /// Test runs only.
    pub runs: Vec<RunSummary>,
    pub jnds_st: Vec<Option<f64>>,
    pub discrimination_trials: Vec<DiscriminationRow>,
    /// Test trials only.
    pub gender_trials: Vec<GenderTrialRow>,
    pub cue_weights: Option<CueWeights>,
    pub cue_weights_error: Option<String>,
    pub early_responses: usize,
}

fn snake_label<T: Serialize>(t: &T) -> String {
    serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_else(|| "none".into())
}

impl ResultBundle {
    pub(crate) fn voice_cue(runner: &VoiceCueRunner, profile: &str, seed: u64, early_responses: usize) -> Self {
        let mut runs = Vec::new();
        let mut rows = Vec::new();
        for (i, (res, spec)) in runner.run_results().iter().zip(runner.plan().runs).enumerate() {
            runs.push(RunSummary {
                run_index: i + 1,
                cue: spec.cue,
                start_delta_st: spec.start_delta_st,
                jnd_st: res.jnd_st,
                termination: snake_label(&res.termination),
                n_trials: res.trials.len(),
                reversal_magnitudes: res.reversal_magnitudes.clone(),
            });
        }
        let mut syllables = runner.served_syllables().iter();
        let training = runner.training_result().map(|r| (0, r));
        let tests = runner.run_results().iter().enumerate().map(|(i, r)| (i + 1, r));
        for (run_index, res) in training.into_iter().chain(tests) {
            for t in &res.trials {
                rows.push(DiscriminationRow {
                    run_index,
                    trial_in_run: t.trial_index,
                    syllables: *syllables.next().expect("one triplet per answered trial"),
                    magnitude_st: t.magnitude_st,
                    step_st: t.step_st,
                    correct: t.correct,
                    is_reversal: t.is_reversal,
                });
            }
        }
        Self {
            experiment: Experiment::VoiceCue,
            profile: profile.into(),
            seed,
            jnds_st: runs.iter().map(|r| r.jnd_st).collect(),
            runs,
            discrimination_trials: rows,
            gender_trials: Vec::new(),
            cue_weights: None,
            cue_weights_error: None,
            early_responses,
        }
    }

    pub(crate) fn gender(runner: &GenderRunner, profile: &str, seed: u64, early_responses: usize) -> Self {
        let mut rows = Vec::new();
        let mut obs = Vec::new();
        for r in runner.test_results() {
            let (f, v) = normalize_cues(r.trial.d_f0_st, r.trial.d_vtl_st);
            rows.push(GenderTrialRow {
                participant: String::new(),
                trial_index: r.trial_index,
                word: r.trial.word.clone(),
                d_f0_st: r.trial.d_f0_st,
                d_vtl_st: r.trial.d_vtl_st,
                delta_f0_norm: f,
                delta_vtl_norm: v,
                male_hand: snake_label(&r.trial.mapping.male),
                response: snake_label(&r.response),
            });
            obs.push(GenderObservation { delta_f0_norm: f, delta_vtl_norm: v, response: r.response });
        }
        let (cue_weights, cue_weights_error) = match fit_logistic_weights(&obs) {
            Ok(w) => (Some(w), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            experiment: Experiment::Gender,
            profile: profile.into(),
            seed,
            runs: Vec::new(),
            jnds_st: Vec::new(),
            discrimination_trials: Vec::new(),
            gender_trials: rows,
            cue_weights,
            cue_weights_error,
            early_responses,
        }
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("bundle serializes");
        v.push(b'\n');
        v
    }

    /// One JSON object per trial row.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |v: String| {
            out.push_str(&v);
            out.push('\n');
        };
        for r in &self.discrimination_trials {
            push(serde_json::to_string(r).expect("row serializes"));
        }
        for r in &self.gender_trials {
            push(serde_json::to_string(r).expect("row serializes"));
        }
        out
    }

    /// Named CSV tables for export.
    pub fn csv_tables(&self, participant: &str) -> Vec<(&'static str, String)> {
        let mut tables = Vec::new();
        match self.experiment {
            Experiment::VoiceCue => {
                let rows: Vec<JndRow> = self
                    .runs
                    .iter()
                    .map(|r| JndRow {
                        participant: participant.into(),
                        interface: self.profile.clone(),
                        cue: r.cue.as_str().into(),
                        start_delta_st: r.start_delta_st,
                        jnd_st: r.jnd_st,
                        n_trials: r.n_trials,
                        termination: r.termination.clone(),
                    })
                    .collect();
                tables.push(("jnds.csv", to_csv_string(&rows).expect("csv")));
                tables.push(("trials.csv", to_csv_string(&self.discrimination_rows_flat()).expect("csv")));
            }
            Experiment::Gender => {
                let rows: Vec<GenderTrialRow> = self
                    .gender_trials
                    .iter()
                    .map(|r| GenderTrialRow { participant: participant.into(), ..r.clone() })
                    .collect();
                tables.push(("trials.csv", to_csv_string(&rows).expect("csv")));
                if let Some(w) = &self.cue_weights {
                    let row = CueWeightRow::new(participant, &self.profile, w);
                    tables.push(("cue_weights.csv", to_csv_string(&[row]).expect("csv")));
                }
            }
        }
        tables
    }

    fn discrimination_rows_flat(&self) -> Vec<FlatDiscriminationRow> {
        self.discrimination_trials
            .iter()
            .map(|r| FlatDiscriminationRow {
                run_index: r.run_index,
                trial_in_run: r.trial_in_run,
                syllable_1: r.syllables[0].0,
                syllable_2: r.syllables[1].0,
                syllable_3: r.syllables[2].0,
                magnitude_st: r.magnitude_st,
                step_st: r.step_st,
                correct: r.correct,
                is_reversal: r.is_reversal,
            })
            .collect()
    }
}

/// csv cannot serialize arrays inside records.
#[derive(Serialize)]
struct FlatDiscriminationRow {
    run_index: usize,
    trial_in_run: u32,
    syllable_1: usize,
    syllable_2: usize,
    syllable_3: usize,
    magnitude_st: f64,
    step_st: f64,
    correct: bool,
    is_reversal: bool,
}
