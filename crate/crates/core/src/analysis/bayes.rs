use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Default Cauchy prior width on the standardized effect size.
pub const DEFAULT_R_SCALE: f64 = 0.707;

const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_MAX_INTERVALS: usize = 20_000;
/// Lower end in u = ln g; the integrand is below exp(-1400) there.
const U_LO: f64 = -8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BfOrientation {
    Bf10,
    Bf01,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceLabel {
    Anecdotal,
    Moderate,
    Strong,
    VeryStrong,
    Extreme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    H1,
    H0,
    /// BF exactly 1.
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub strength: EvidenceLabel,
    pub favours: Hypothesis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    pub bf10: f64,
    pub bf01: f64,
    pub label: Evidence,
    /// Quadrature error estimate relative to the integral.
    pub rel_error: f64,
}

/// Five-bin scheme on max(bf, 1/bf): 1-3, 3-10, 10-30, 30-100, above 100.
pub fn classify_bf(bf: f64, orientation: BfOrientation) -> Result<Evidence, AnalysisError> {
    if !(bf > 0.0 && bf.is_finite()) {
        return Err(AnalysisError::Domain(format!("Bayes factor must be positive and finite, got {bf}")));
    }
    let bf10 = match orientation {
        BfOrientation::Bf10 => bf,
        BfOrientation::Bf01 => 1.0 / bf,
    };
    let m = bf10.max(1.0 / bf10);
    let strength = if m < 3.0 {
        EvidenceLabel::Anecdotal
    } else if m < 10.0 {
        EvidenceLabel::Moderate
    } else if m < 30.0 {
        EvidenceLabel::Strong
    } else if m < 100.0 {
        EvidenceLabel::VeryStrong
    } else {
        EvidenceLabel::Extreme
    };
    let favours = if bf10 > 1.0 {
        Hypothesis::H1
    } else if bf10 < 1.0 {
        Hypothesis::H0
    } else {
        Hypothesis::Neither
    };
    Ok(Evidence { strength, favours })
}

/// Default (JZS) Bayes factor for a one-sample or paired t (`n2 = None`,
/// `n1` pairs) or a two-sample t. The effect size has a Cauchy(0, r) prior,
/// written as a normal mixed over g ~ InvGamma(1/2, 1/2); the integral over
/// g is taken in u = ln g by adaptive Gauss-Kronrod.
pub fn jzs_bf10(t: f64, n1: usize, n2: Option<usize>, r_scale: f64) -> Result<BayesResult, AnalysisError> {
    if !t.is_finite() {
        return Err(AnalysisError::Domain(format!("t must be finite, got {t}")));
    }
    if !(r_scale > 0.0 && r_scale.is_finite()) {
        return Err(AnalysisError::Domain(format!("prior scale must be positive, got {r_scale}")));
    }
    let (n_eff, nu) = match n2 {
        None if n1 >= 2 => (n1 as f64, (n1 - 1) as f64),
        Some(n2) if n1 >= 1 && n2 >= 1 && n1 + n2 >= 3 => {
            ((n1 * n2) as f64 / (n1 + n2) as f64, (n1 + n2 - 2) as f64)
        }
        _ => return Err(AnalysisError::Domain(format!("no degrees of freedom for n1 = {n1}, n2 = {n2:?}"))),
    };
    let r2 = r_scale * r_scale;
    let null_log = (nu + 1.0) / 2.0 * (t * t / nu).ln_1p();
    let integrand = |u: f64| {
        let g = u.exp();
        let a = 1.0 + n_eff * g * r2;
        let log_f = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * u - 0.5 / g - 0.5 * a.ln()
            - (nu + 1.0) / 2.0 * (t * t / (a * nu)).ln_1p()
            + null_log;
        log_f.exp()
    };

    // for large g the integrand decays like exp(-u), so the tail beyond U is about f(U)
    let mut hi = 40.0;
    let (mut value, mut err) = adaptive_gk15(&integrand, U_LO, hi)?;
    while integrand(hi) > 1e-15 * value {
        let (v, e) = adaptive_gk15(&integrand, hi, hi + 20.0)?;
        value += v;
        err += e;
        hi += 20.0;
        if hi > 2000.0 {
            return Err(AnalysisError::Numeric(format!("integrand tail did not vanish (t = {t}, df = {nu})")));
        }
    }
    if !(value > 0.0 && value.is_finite()) {
        return Err(AnalysisError::Numeric(format!("integral is {value} (t = {t}, df = {nu}, n = {n_eff})")));
    }
    let bf10 = value;
    Ok(BayesResult {
        bf10,
        bf01: 1.0 / bf10,
        label: classify_bf(bf10, BfOrientation::Bf10)?,
        rel_error: err / value,
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive: keep bisecting the interval with the largest error.
fn adaptive_gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), AnalysisError> {
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    while total_err > QUAD_REL_TOL * total.abs() && total_err > f64::MIN_POSITIVE {
        if parts.len() >= QUAD_MAX_INTERVALS {
            return Err(AnalysisError::Numeric(format!(
                "quadrature on [{a}, {b}] did not converge: estimate {total:e}, error {total_err:e}, {} intervals",
                parts.len()
            )));
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, pv, pe) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gk15(f, lo, mid);
        let (rv, re) = gk15(f, mid, hi);
        total += lv + rv - pv;
        total_err += le + re - pe;
        parts.push((lo, mid, lv, le));
        parts.push((mid, hi, rv, re));
    }
    // re-sum to shed the drift of the running updates
    let total = parts.iter().map(|p| p.2).sum();
    let total_err = parts.iter().map(|p| p.3).sum();
    Ok((total, total_err))
}
