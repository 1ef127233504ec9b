//! Measurement oracles: fundamental frequency and spectral-envelope displacement.

use nalgebra::{DMatrix, DVector};

use super::{AudioBuffer, StimError};

const MIN_F0_HZ: f64 = 60.0;
const MAX_F0_HZ: f64 = 1000.0;
const YIN_THRESHOLD: f64 = 0.10;
const SUBMULTIPLE_SLACK: f64 = 0.01;
const VOICED_MAX_APERIODICITY: f64 = 0.25;

/// Fundamental-frequency estimate in Hz.
///
/// Frame-wise YIN (cumulative-mean-normalized difference) with parabolic
/// refinement of the raw difference minimum; the result is the median over
/// voiced frames.
pub fn estimate_f0(buf: &AudioBuffer) -> Result<f64, StimError> {
    let mut estimates: Vec<f64> = voiced_frames(buf)?.into_iter().map(|f| f.f0_hz).collect();
    if estimates.len() < 3 {
        return Err(StimError::NoEstimate("fewer than three voiced frames"));
    }
    Ok(median(&mut estimates))
}

struct VoicedFrame {
    start: usize,
    len: usize,
    f0_hz: f64,
}

fn voiced_frames(buf: &AudioBuffer) -> Result<Vec<VoicedFrame>, StimError> {
    let sr = buf.sample_rate_hz as f64;
    let x = &buf.samples;
    let tau_min = (sr / MAX_F0_HZ).floor() as usize;
    let tau_max = (sr / MIN_F0_HZ).ceil() as usize;
    let window = tau_max;
    let frame = window + tau_max + 2;
    if x.len() < frame {
        return Err(StimError::NoEstimate("buffer shorter than one analysis frame"));
    }
    let hop = (sr * 0.005).round().max(1.0) as usize;
    let energy_floor = 1e-10 * window as f64;

    let mut frames = Vec::new();
    let mut d = vec![0.0; tau_max + 2];
    let mut start = 0;
    while start + frame <= x.len() {
        let seg = &x[start..start + frame];
        let energy: f64 = seg[..window].iter().map(|v| v * v).sum();
        let here = start;
        start += hop;
        if energy < energy_floor {
            continue;
        }
        for tau in 1..=tau_max + 1 {
            d[tau] = (0..window).map(|j| {
                let diff = seg[j] - seg[j + tau];
                diff * diff
            }).sum();
        }
        // cumulative mean normalization
        let mut running = 0.0;
        let mut dn = vec![1.0; tau_max + 2];
        for tau in 1..=tau_max + 1 {
            running += d[tau];
            dn[tau] = if running > 0.0 { d[tau] * tau as f64 / running } else { 1.0 };
        }
        let Some(tau) = pick_period(&dn, tau_min.max(2), tau_max) else {
            continue;
        };
        let refined = parabolic_min(d[tau - 1], d[tau], d[tau + 1]) + tau as f64;
        if refined > 0.0 {
            frames.push(VoicedFrame { start: here, len: window + tau, f0_hz: sr / refined });
        }
    }
    Ok(frames)
}

/// Lag of the period: the global minimum of the normalized difference,
/// moved to the shortest sub-multiple lag whose dip is equally deep.
fn pick_period(dn: &[f64], lo: usize, hi: usize) -> Option<usize> {
    let local_min = |center: usize| -> usize {
        let a = center.saturating_sub(2).max(lo);
        let b = (center + 2).min(hi);
        (a..=b).min_by(|x, y| dn[*x].total_cmp(&dn[*y])).unwrap_or(center)
    };
    let global = (lo..=hi).min_by(|a, b| dn[*a].total_cmp(&dn[*b]))?;
    if dn[global] > VOICED_MAX_APERIODICITY {
        return None;
    }
    let tolerance = (2.0 * dn[global]).max(dn[global] + SUBMULTIPLE_SLACK);
    for k in (2..=6).rev() {
        let cand = (global as f64 / k as f64).round() as usize;
        if cand < lo {
            continue;
        }
        let cand = local_min(cand);
        if dn[cand] <= tolerance.min(YIN_THRESHOLD) {
            return Some(cand);
        }
    }
    Some(global)
}

/// Offset of the vertex of the parabola through three equally spaced points.
fn parabolic_min(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::EPSILON * (a.abs() + b.abs() + c.abs()).max(1e-300) {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

const ENV_LO_HZ: f64 = 100.0;
const ENV_HI_HZ: f64 = 16_000.0;
const ANALYSIS_LO_HZ: f64 = 300.0;
const ANALYSIS_HI_HZ: f64 = 6_000.0;
const AXIS_STEP_ST: f64 = 0.02;
const MAX_SHIFT_ST: f64 = 15.0;
const LPC_ORDER: usize = 8;
const CLOSED_PHASE_PASSES: usize = 2;
const GCI_MIN_SPACING: f64 = 0.7;
const GCI_MARGIN: f64 = 0.03;
const GCI_PERIOD_TOLERANCE: f64 = 0.15;
const OUTLIER_PASSES: usize = 4;
const OUTLIER_FACTOR: f64 = 4.0;
const CLOSED_PHASE_FRACTION: f64 = 0.3;

/// Log-frequency displacement (semitones) of `test`'s spectral envelope relative to `reference`.
///
/// A positive result means the test envelope sits higher in frequency. For a
/// pure VTL transform of `d` semitones the expected result is `-d`.
///
/// Envelopes are all-pole fits from closed-phase covariance linear
/// prediction. Unlike a smoothed magnitude spectrum, they do not depend on
/// where the harmonics fall, so small shifts are not pulled towards zero.
pub fn estimate_envelope_shift(reference: &AudioBuffer, test: &AudioBuffer) -> Result<f64, StimError> {
    if reference.sample_rate_hz != test.sample_rate_hz {
        return Err(StimError::Domain("sample rates differ".into()));
    }
    let sr = reference.sample_rate_hz as f64;
    let env_ref = log_axis(&closed_phase_lpc(reference)?, sr);
    let env_test = log_axis(&closed_phase_lpc(test)?, sr);

    // Correlate spectral slopes; a residual tilt becomes an offset that the
    // per-window mean removal discards.
    let slope_ref: Vec<f64> = env_ref.windows(2).map(|w| w[1] - w[0]).collect();
    let slope_test: Vec<f64> = env_test.windows(2).map(|w| w[1] - w[0]).collect();

    let st_of = |hz: f64| 12.0 * (hz / ENV_LO_HZ).log2();
    let a0 = (st_of(ANALYSIS_LO_HZ) / AXIS_STEP_ST).round() as isize;
    let a1 = (st_of(ANALYSIS_HI_HZ) / AXIS_STEP_ST).round() as isize;
    let max_lag = (MAX_SHIFT_ST / AXIS_STEP_ST).round() as isize;
    let test_win = &slope_test[a0 as usize..a1 as usize];

    let mut scores = Vec::with_capacity((2 * max_lag + 1) as usize);
    for lag in -max_lag..=max_lag {
        let lo = a0 - lag;
        let hi = a1 - lag;
        if lo < 0 || hi as usize > slope_ref.len() {
            scores.push(f64::NEG_INFINITY);
            continue;
        }
        scores.push(pearson(test_win, &slope_ref[lo as usize..hi as usize]));
    }
    let (best, &best_score) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty lag range");
    if !best_score.is_finite() || best_score <= 0.0 {
        return Err(StimError::NoEstimate("spectral envelopes do not correlate"));
    }
    let mut lag = best as f64 - max_lag as f64;
    if best > 0 && best + 1 < scores.len() && scores[best - 1].is_finite() && scores[best + 1].is_finite() {
        // parabolic_min on the negated scores gives the maximum
        lag += parabolic_min(-scores[best - 1], -best_score, -scores[best + 1]);
    }
    Ok(lag * AXIS_STEP_ST)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return f64::NEG_INFINITY;
    }
    sab / (saa * sbb).sqrt()
}

/// Predictor coefficients `c` with `x[n] ~ sum_k c[k] x[n-k-1]`.
///
/// Closed-phase analysis: a rough fit over all periodic frames gives a
/// residual whose largest peak in each period marks glottal closure. The
/// final fit uses only the samples that follow each closure, where the signal
/// is a free decay of the vocal-tract filter.
fn closed_phase_lpc(buf: &AudioBuffer) -> Result<Vec<f64>, StimError> {
    let x = &buf.samples;
    let p = LPC_ORDER;
    let frames = voiced_frames(buf)?;
    if frames.len() < 3 {
        return Err(StimError::NoEstimate("fewer than three voiced frames"));
    }
    let mut f0s: Vec<f64> = frames.iter().map(|f| f.f0_hz).collect();
    let period = buf.sample_rate_hz as f64 / median(&mut f0s);
    let mut voiced = vec![false; x.len()];
    for f in &frames {
        voiced[f.start..f.start + f.len].iter_mut().for_each(|v| *v = true);
    }
    let voiced_rows: Vec<usize> = (p..x.len()).filter(|&n| voiced[n]).collect();
    if voiced_rows.len() < 8 * p {
        return Err(StimError::NoEstimate("too few voiced samples for linear prediction"));
    }
    let mut coef = solve_lpc(x, &voiced_rows, p)?;
    for _ in 0..CLOSED_PHASE_PASSES {
        let mut order: Vec<(f64, usize)> = voiced_rows
            .iter()
            .map(|&n| {
                let e = x[n] - coef.iter().enumerate().map(|(k, c)| c * x[n - k - 1]).sum::<f64>();
                (e.abs(), n)
            })
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0));
        let min_gap = (GCI_MIN_SPACING * period) as usize;
        let mut closures: Vec<usize> = Vec::new();
        for &(_, n) in &order {
            if closures.iter().all(|&g| g.abs_diff(n) >= min_gap) {
                closures.push(n);
            }
        }
        // a closure must sit one period from another one
        closures.sort_unstable();
        let periodic = |a: usize, b: usize| {
            let gap = a.abs_diff(b) as f64;
            (gap - period).abs() <= GCI_PERIOD_TOLERANCE * period
        };
        let closures: Vec<usize> = (0..closures.len())
            .filter(|&i| {
                (i > 0 && periodic(closures[i], closures[i - 1]))
                    || (i + 1 < closures.len() && periodic(closures[i], closures[i + 1]))
            })
            .map(|i| closures[i])
            .collect();
        let margin = (GCI_MARGIN * period).ceil() as usize;
        let span = (CLOSED_PHASE_FRACTION * period) as usize;
        let segment = |g: usize| -> Vec<usize> {
            ((g + margin)..(g + margin + span).min(x.len())).filter(|&n| voiced[n]).collect()
        };
        let mut kept: Vec<Vec<usize>> = closures.iter().map(|&g| segment(g)).filter(|r| !r.is_empty()).collect();
        if kept.iter().map(Vec::len).sum::<usize>() < 4 * p {
            break;
        }
        coef = solve_lpc(x, &kept.concat(), p)?;
        // closures whose rows the fit explains poorly are noise peaks, not closures
        for _ in 0..OUTLIER_PASSES {
            let score = |rows: &Vec<usize>| {
                let (mut err, mut energy) = (0.0, 0.0);
                for &n in rows {
                    let e = x[n] - coef.iter().enumerate().map(|(k, c)| c * x[n - k - 1]).sum::<f64>();
                    err += e * e;
                    energy += x[n] * x[n];
                }
                err / energy.max(f64::MIN_POSITIVE)
            };
            let scores: Vec<f64> = kept.iter().map(score).collect();
            let mut sorted = scores.clone();
            let med = median(&mut sorted);
            let before = kept.len();
            kept = kept
                .into_iter()
                .zip(&scores)
                .filter(|(_, &sc)| sc <= OUTLIER_FACTOR * med)
                .map(|(r, _)| r)
                .collect();
            if kept.len() == before || kept.iter().map(Vec::len).sum::<usize>() < 4 * p {
                break;
            }
            coef = solve_lpc(x, &kept.concat(), p)?;
        }
    }
    Ok(coef)
}

fn solve_lpc(x: &[f64], rows: &[usize], p: usize) -> Result<Vec<f64>, StimError> {
    // least squares on the data matrix itself: the normal equations of an
    // oversampled signal square an already large condition number
    let a = DMatrix::from_fn(rows.len(), p, |r, k| x[rows[r] - k - 1]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&n| x[n]));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|_| StimError::NoEstimate("prediction least squares"))?;
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(StimError::NoEstimate("prediction least squares"));
    }
    Ok(coef.iter().copied().collect())
}

/// Log magnitude of the all-pole envelope on a uniform semitone axis starting at `ENV_LO_HZ`.
fn log_axis(coef: &[f64], sr: f64) -> Vec<f64> {
    let hi = ENV_HI_HZ.min(sr / 2.0 * 0.98);
    let n_points = ((12.0 * (hi / ENV_LO_HZ).log2()) / AXIS_STEP_ST).floor() as usize;
    (0..n_points)
        .map(|k| {
            let f = ENV_LO_HZ * 2f64.powf(k as f64 * AXIS_STEP_ST / 12.0);
            let w = 2.0 * std::f64::consts::PI * f / sr;
            let (mut re, mut im) = (1.0, 0.0);
            for (j, c) in coef.iter().enumerate() {
                let ang = w * (j + 1) as f64;
                re -= c * ang.cos();
                im += c * ang.sin();
            }
            -0.5 * (re * re + im * im).ln()
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    fn tone(partials: &[(f64, f64)], sr: u32, secs: f64) -> AudioBuffer {
        let n = (sr as f64 * secs) as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                partials.iter().map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin()).sum()
            })
            .collect();
        AudioBuffer::new(samples, sr).unwrap()
    }

    #[test]
    fn dominant_second_harmonic_does_not_double_f0() {
        let buf = tone(&[(265.0, 0.1), (530.0, 1.0), (795.0, 0.05)], 44_100, 0.3);
        let f0 = estimate_f0(&buf).unwrap();
        assert!((f0 / 265.0 - 1.0).abs() < 1e-3, "{f0}");
    }

    #[test]
    fn noise_has_no_f0() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples = (0..8000).map(|_| rng.random::<f64>() - 0.5).collect();
        let buf = AudioBuffer::new(samples, 44_100).unwrap();
        assert!(matches!(estimate_f0(&buf), Err(StimError::NoEstimate(_))));
    }

    #[test]
    fn parabola_vertex() {
        // y = (x - 0.25)^2 sampled at -1, 0, 1
        let f = |x: f64| (x - 0.25) * (x - 0.25);
        assert!((parabolic_min(f(-1.0), f(0.0), f(1.0)) - 0.25).abs() < 1e-12);
        assert_eq!(parabolic_min(1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn mismatched_rates_rejected() {
        let a = tone(&[(200.0, 1.0)], 44_100, 0.2);
        let b = tone(&[(200.0, 1.0)], 22_050, 0.2);
        assert!(matches!(estimate_envelope_shift(&a, &b), Err(StimError::Domain(_))));
    }
}
