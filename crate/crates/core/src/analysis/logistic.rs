use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{normalize_cues, AnalysisError, Cue, F0_SPAN_ST, VTL_SPAN_ST};
use crate::listenersim::GenderResponse;

pub const IRLS_MAX_ITERATIONS: usize = 100;
pub const IRLS_TOLERANCE: f64 = 1e-8;
pub const SEPARATION_RIDGE: f64 = 1e-4;
/// Linear predictors beyond this mean fitted probabilities within ~1e-13 of 0 or 1.
const SEPARATION_ETA: f64 = 30.0;

/// One gender-test response in normalized cue coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenderObservation {
    pub delta_f0_norm: f64,
    pub delta_vtl_norm: f64,
    pub response: GenderResponse,
}

impl GenderObservation {
    pub fn from_semitones(d_f0_st: f64, d_vtl_st: f64, response: GenderResponse) -> Self {
        let (delta_f0_norm, delta_vtl_norm) = normalize_cues(d_f0_st, d_vtl_st);
        Self { delta_f0_norm, delta_vtl_norm, response }
    }

    fn x(&self) -> Vector3<f64> {
        Vector3::new(1.0, self.delta_f0_norm, self.delta_vtl_norm)
    }

    fn y(&self) -> f64 {
        if self.response.is_male() {
            1.0
        } else {
            0.0
        }
    }
}

/// Per-participant logistic fit with male coded as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueWeights {
    pub intercept_logit: f64,
    /// Logit per unit of normalized δ.
    pub b_f0_logit: f64,
    pub b_vtl_logit: f64,
    pub w_f0_bk_per_st: f64,
    pub w_vtl_bk_per_st: f64,
    pub n_trials: usize,
    pub separation_flag: bool,
    pub iterations: usize,
}

impl CueWeights {
    pub fn coefficients(&self) -> [f64; 3] {
        [self.intercept_logit, self.b_f0_logit, self.b_vtl_logit]
    }

    /// The same fit with female coded as 1: every coefficient changes sign.
    pub fn female_coded(&self) -> CueWeights {
        CueWeights {
            intercept_logit: -self.intercept_logit,
            b_f0_logit: -self.b_f0_logit,
            b_vtl_logit: -self.b_vtl_logit,
            w_f0_bk_per_st: -self.w_f0_bk_per_st,
            w_vtl_bk_per_st: -self.w_vtl_bk_per_st,
            ..*self
        }
    }
}

/// Berkson units (log2 odds) per semitone from a logit-per-δ coefficient.
pub fn to_berkson_per_st(coef_logit_per_delta: f64, cue: Cue) -> f64 {
    let span = match cue {
        Cue::F0 => F0_SPAN_ST,
        Cue::Vtl => VTL_SPAN_ST,
    };
    coef_logit_per_delta / std::f64::consts::LN_2 / span
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood minus `ridge/2 * |beta|^2`.
pub fn log_likelihood(beta: [f64; 3], data: &[GenderObservation], ridge: f64) -> f64 {
    let b = Vector3::from(beta);
    let ll: f64 = data
        .iter()
        .map(|o| {
            let eta = o.x().dot(&b);
            o.y() * eta - log1p_exp(eta)
        })
        .sum();
    ll - 0.5 * ridge * b.norm_squared()
}

pub fn log_likelihood_gradient(beta: [f64; 3], data: &[GenderObservation], ridge: f64) -> [f64; 3] {
    let b = Vector3::from(beta);
    let mut g = -ridge * b;
    for o in data {
        let x = o.x();
        g += x * (o.y() - crate::listenersim::logistic(x.dot(&b)));
    }
    g.into()
}

struct Fit {
    beta: Vector3<f64>,
    iterations: usize,
    converged: bool,
}

/// Newton-Raphson (IRLS) with step halving on the penalized log-likelihood.
fn irls(data: &[GenderObservation], ridge: f64) -> Result<Fit, AnalysisError> {
    let mut beta = Vector3::zeros();
    let mut ll = log_likelihood(beta.into(), data, ridge);
    for it in 1..=IRLS_MAX_ITERATIONS {
        let mut h = Matrix3::identity() * ridge;
        let mut g = -ridge * beta;
        for o in data {
            let x = o.x();
            let p = crate::listenersim::logistic(x.dot(&beta));
            g += x * (o.y() - p);
            h += x * x.transpose() * (p * (1.0 - p));
        }
        let Some(step) = h.cholesky().map(|c| c.solve(&g)) else {
            // curvature vanished: every fitted probability is 0 or 1
            return Ok(Fit { beta, iterations: it, converged: false });
        };
        let mut scale = 1.0;
        let mut next = beta + step;
        let mut next_ll = log_likelihood(next.into(), data, ridge);
        while next_ll < ll && scale > 1e-10 {
            scale *= 0.5;
            next = beta + step * scale;
            next_ll = log_likelihood(next.into(), data, ridge);
        }
        if !next.iter().all(|v| v.is_finite()) {
            return Err(AnalysisError::Numeric(format!("non-finite coefficients at iteration {it}")));
        }
        let change = (next - beta).amax();
        beta = next;
        ll = next_ll;
        if change < IRLS_TOLERANCE {
            return Ok(Fit { beta, iterations: it, converged: true });
        }
    }
    Ok(Fit { beta, iterations: IRLS_MAX_ITERATIONS, converged: false })
}

fn check_design(data: &[GenderObservation]) -> Result<(), AnalysisError> {
    if data.len() < 3 {
        return Err(AnalysisError::DegenerateDesign(format!("need at least 3 trials, got {}", data.len())));
    }
    if data.iter().any(|o| !(o.delta_f0_norm.is_finite() && o.delta_vtl_norm.is_finite())) {
        return Err(AnalysisError::Domain("non-finite cue value".into()));
    }
    let first = data[0];
    let one_condition = data
        .iter()
        .all(|o| o.delta_f0_norm == first.delta_f0_norm && o.delta_vtl_norm == first.delta_vtl_norm);
    if one_condition {
        return Err(AnalysisError::DegenerateDesign("all trials share a single condition".into()));
    }
    let mut xtx = Matrix3::zeros();
    for o in data {
        xtx += o.x() * o.x().transpose();
    }
    let sv = xtx.singular_values();
    if sv.min() <= 1e-12 * sv.max() {
        return Err(AnalysisError::DegenerateDesign(
            "intercept, δF0 and δVTL are not separately identifiable".into(),
        ));
    }
    Ok(())
}

/// Maximum-likelihood `P(male) = logistic(b0 + bF0·δF0 + bVTL·δVTL)`. Under
/// complete or quasi-complete separation the coefficients come from a weakly
/// ridge-penalized fit and `separation_flag` is set.
pub fn fit_logistic_weights(data: &[GenderObservation]) -> Result<CueWeights, AnalysisError> {
    check_design(data)?;
    let plain = irls(data, 0.0)?;
    let max_eta = data.iter().map(|o| o.x().dot(&plain.beta).abs()).fold(0.0, f64::max);
    let separated = !plain.converged || max_eta > SEPARATION_ETA;
    let fit = if separated {
        let ridged = irls(data, SEPARATION_RIDGE)?;
        if !ridged.converged {
            return Err(AnalysisError::Numeric("ridge-penalized fit did not converge".into()));
        }
        ridged
    } else {
        plain
    };
    let [b0, bf, bv]: [f64; 3] = fit.beta.into();
    Ok(CueWeights {
        intercept_logit: b0,
        b_f0_logit: bf,
        b_vtl_logit: bv,
        w_f0_bk_per_st: to_berkson_per_st(bf, Cue::F0),
        w_vtl_bk_per_st: to_berkson_per_st(bv, Cue::Vtl),
        n_trials: data.len(),
        separation_flag: separated,
        iterations: fit.iterations,
    })
}
