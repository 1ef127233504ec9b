use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::AnalysisError;

/// Statistics of natural-log JNDs; the geometric mean is reported back in st.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JndSummary {
    pub geometric_mean_st: f64,
    pub log_mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub log_sd: f64,
    pub n: usize,
}

pub fn summarize_jnds(jnds: &[f64]) -> Result<JndSummary, AnalysisError> {
    if jnds.is_empty() {
        return Err(AnalysisError::Domain("no JNDs to summarize".into()));
    }
    if let Some(bad) = jnds.iter().find(|j| !(j.is_finite() && **j > 0.0)) {
        return Err(AnalysisError::Domain(format!("JNDs must be positive, got {bad}")));
    }
    let logs: Vec<f64> = jnds.iter().map(|j| j.ln()).collect();
    let (m, sd) = mean_sd(&logs);
    Ok(JndSummary { geometric_mean_st: m.exp(), log_mean: m, log_sd: sd, n: jnds.len() })
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (m, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Paired,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
    /// Paired: mean difference over the sd of differences. Welch: mean
    /// difference over the pooled sd.
    pub cohens_d: f64,
    pub mean_difference: f64,
}

fn two_sided_p(t: f64, df: f64) -> Result<f64, AnalysisError> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| AnalysisError::Numeric(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Two-sided t-test of `a` against `b` (a - b).
pub fn t_test(a: &[f64], b: &[f64], kind: TestKind) -> Result<TestResult, AnalysisError> {
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("samples must be finite".into()));
    }
    match kind {
        TestKind::Paired => {
            if a.len() != b.len() || a.len() < 2 {
                return Err(AnalysisError::Domain(format!(
                    "paired samples need equal lengths >= 2, got {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let (m, sd) = mean_sd(&diffs);
            let df = (diffs.len() - 1) as f64;
            if sd == 0.0 {
                // identical samples carry no evidence; a constant nonzero shift has no defined t
                if m == 0.0 {
                    return Ok(TestResult { kind, t: 0.0, df, p: 1.0, cohens_d: 0.0, mean_difference: 0.0 });
                }
                return Err(AnalysisError::UndefinedStatistic(
                    "differences have zero variance and nonzero mean".into(),
                ));
            }
            let t = m / (sd / (diffs.len() as f64).sqrt());
            Ok(TestResult { kind, t, df, p: two_sided_p(t, df)?, cohens_d: m / sd, mean_difference: m })
        }
        TestKind::Welch => {
            if a.len() < 2 || b.len() < 2 {
                return Err(AnalysisError::Domain(format!(
                    "Welch samples need length >= 2, got {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            let (n1, n2) = (a.len() as f64, b.len() as f64);
            let (m1, s1) = mean_sd(a);
            let (m2, s2) = mean_sd(b);
            let (v1, v2) = (s1 * s1 / n1, s2 * s2 / n2);
            if v1 + v2 == 0.0 {
                return Err(AnalysisError::UndefinedStatistic("both samples have zero variance".into()));
            }
            let t = (m1 - m2) / (v1 + v2).sqrt();
            let df = (v1 + v2).powi(2) / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
            let pooled = (((n1 - 1.0) * s1 * s1 + (n2 - 1.0) * s2 * s2) / (n1 + n2 - 2.0)).sqrt();
            Ok(TestResult {
                kind,
                t,
                df,
                p: two_sided_p(t, df)?,
                cohens_d: (m1 - m2) / pooled,
                mean_difference: m1 - m2,
            })
        }
    }
}
