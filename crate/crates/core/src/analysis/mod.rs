//! Statistics for both tests: cue normalization, logistic cue weights, JND
//! summaries, t-tests, default Bayes factors and the 2x2 repeated-measures ANOVA.

mod anova;
mod bayes;
mod logistic;
mod stats;
pub mod tables;

use thiserror::Error;

pub use anova::{rm_anova_2x2, AnovaEffect, AnovaResult};
pub use bayes::{classify_bf, jzs_bf10, BayesResult, BfOrientation, Evidence, EvidenceLabel, Hypothesis, DEFAULT_R_SCALE};
pub use logistic::{
    fit_logistic_weights, log_likelihood, log_likelihood_gradient, to_berkson_per_st, CueWeights, GenderObservation,
    IRLS_MAX_ITERATIONS, IRLS_TOLERANCE, SEPARATION_RIDGE,
};
pub use stats::{summarize_jnds, t_test, JndSummary, TestKind, TestResult};

pub use crate::protocol::Cue;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("incomplete design: {0}")]
    IncompleteDesign(String),
}

/// Semitone span of each cue over the gender-test grid.
pub const F0_SPAN_ST: f64 = 12.0;
pub const VTL_SPAN_ST: f64 = 3.6;

/// Map (ΔF0, ΔVTL) in semitones to the normalized coordinates in which the
/// reference voice sits at (-0.5, -0.5) and the widest condition at (+0.5, +0.5).
pub fn normalize_cues(delta_f0_st: f64, delta_vtl_st: f64) -> (f64, f64) {
    (-delta_f0_st / F0_SPAN_ST - 0.5, delta_vtl_st / VTL_SPAN_ST - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anchors_are_bit_exact() {
        assert_eq!(normalize_cues(0.0, 0.0), (-0.5, -0.5));
        assert_eq!(normalize_cues(-12.0, 3.6), (0.5, 0.5));
        assert_eq!(normalize_cues(-6.0, 1.8), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn normalization_is_affine(a in -24.0f64..24.0, b in -24.0f64..24.0, c in -10.0f64..10.0, d in -10.0f64..10.0) {
            let (fa, va) = normalize_cues(a, c);
            let (fb, vb) = normalize_cues(b, d);
            let (fm, vm) = normalize_cues(0.5 * (a + b), 0.5 * (c + d));
            prop_assert!((fm - 0.5 * (fa + fb)).abs() < 1e-12);
            prop_assert!((vm - 0.5 * (va + vb)).abs() < 1e-12);
        }
    }
}
