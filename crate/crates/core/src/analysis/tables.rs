//! Tidy CSV rows: one per participant x condition, one per comparison.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{BayesResult, CueWeights, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JndRow {
    pub participant: String,
    pub interface: String,
    pub cue: String,
    pub start_delta_st: f64,
    pub jnd_st: Option<f64>,
    pub n_trials: usize,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueWeightRow {
    pub participant: String,
    pub interface: String,
    pub n_trials: usize,
    pub separation_flag: bool,
    pub intercept_logit: f64,
    pub b_f0_logit: f64,
    pub b_vtl_logit: f64,
    pub w_f0_bk_per_st: f64,
    pub w_vtl_bk_per_st: f64,
    /// Intercept with female coded as 1.
    pub intercept_logit_female: f64,
}

impl CueWeightRow {
    pub fn new(participant: &str, interface: &str, w: &CueWeights) -> Self {
        Self {
            participant: participant.into(),
            interface: interface.into(),
            n_trials: w.n_trials,
            separation_flag: w.separation_flag,
            intercept_logit: w.intercept_logit,
            b_f0_logit: w.b_f0_logit,
            b_vtl_logit: w.b_vtl_logit,
            w_f0_bk_per_st: w.w_f0_bk_per_st,
            w_vtl_bk_per_st: w.w_vtl_bk_per_st,
            intercept_logit_female: w.female_coded().intercept_logit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderTrialRow {
    pub participant: String,
    pub trial_index: u32,
    pub word: String,
    pub d_f0_st: f64,
    pub d_vtl_st: f64,
    pub delta_f0_norm: f64,
    pub delta_vtl_norm: f64,
    pub male_hand: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub comparison: String,
    pub test: String,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub cohens_d: f64,
    pub bf10: Option<f64>,
    pub bf01: Option<f64>,
    pub evidence: Option<String>,
}

impl ComparisonRow {
    pub fn new(comparison: &str, test: &TestResult, bayes: Option<&BayesResult>) -> Self {
        Self {
            comparison: comparison.into(),
            test: format!("{:?}", test.kind).to_lowercase(),
            t: test.t,
            df: test.df,
            p: test.p,
            cohens_d: test.cohens_d,
            bf10: bayes.map(|b| b.bf10),
            bf01: bayes.map(|b| b.bf01),
            evidence: bayes.map(|b| format!("{:?} for {:?}", b.label.strength, b.label.favours)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub cue: String,
    pub effect: String,
    pub f: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p: f64,
    pub partial_eta_sq: f64,
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}
