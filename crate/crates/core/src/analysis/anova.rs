use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaEffect {
    pub ss: f64,
    pub ss_error: f64,
    pub f: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p: f64,
    pub partial_eta_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// Factor A (interface).
    pub a: AnovaEffect,
    /// Factor B (direction).
    pub b: AnovaEffect,
    pub ab: AnovaEffect,
    pub ss_subjects: f64,
    pub ss_total: f64,
    pub n_subjects: usize,
}

/// Sums of squares below this fraction of the total are treated as zero.
const ZERO_SS: f64 = 1e-20;

fn effect(ss: f64, ss_error: f64, n: usize, scale: f64) -> Result<AnovaEffect, AnalysisError> {
    let df_den = (n - 1) as f64;
    let tiny = ZERO_SS * scale;
    let (f, p, eta) = if ss_error <= tiny {
        if ss > tiny {
            return Err(AnalysisError::UndefinedStatistic("effect with zero error variance".into()));
        }
        (0.0, 1.0, 0.0)
    } else {
        let f = (ss / 1.0) / (ss_error / df_den);
        let dist = FisherSnedecor::new(1.0, df_den).map_err(|e| AnalysisError::Numeric(e.to_string()))?;
        (f, dist.sf(f), ss / (ss + ss_error))
    };
    Ok(AnovaEffect { ss, ss_error, f, df_num: 1.0, df_den, p, partial_eta_sq: eta })
}

/// Two-way within-subject ANOVA. Each row is one subject with cells ordered
/// `[A1B1, A1B2, A2B1, A2B2]`; NaN marks a missing cell. Every effect is
/// tested against its own effect-by-subject interaction.
pub fn rm_anova_2x2(data: &[[f64; 4]]) -> Result<AnovaResult, AnalysisError> {
    let n = data.len();
    if n < 2 {
        return Err(AnalysisError::IncompleteDesign(format!("need at least 2 subjects, got {n}")));
    }
    if let Some(i) = data.iter().position(|row| row.iter().any(|v| !v.is_finite())) {
        return Err(AnalysisError::IncompleteDesign(format!("subject {i} has a missing or non-finite cell")));
    }
    let nf = n as f64;
    let cell = |j: usize, k: usize| 2 * j + k;
    let grand = data.iter().flatten().sum::<f64>() / (4.0 * nf);
    let subj: Vec<f64> = data.iter().map(|r| r.iter().sum::<f64>() / 4.0).collect();
    let cell_mean: Vec<f64> = (0..4).map(|c| data.iter().map(|r| r[c]).sum::<f64>() / nf).collect();
    let a_mean = [0, 1].map(|j| (cell_mean[cell(j, 0)] + cell_mean[cell(j, 1)]) / 2.0);
    let b_mean = [0, 1].map(|k| (cell_mean[cell(0, k)] + cell_mean[cell(1, k)]) / 2.0);

    let ss_total: f64 = data.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_subjects = 4.0 * subj.iter().map(|s| (s - grand).powi(2)).sum::<f64>();
    let ss_a = 2.0 * nf * a_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = 2.0 * nf * b_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for j in 0..2 {
        for k in 0..2 {
            ss_ab += (cell_mean[cell(j, k)] - a_mean[j] - b_mean[k] + grand).powi(2);
        }
    }
    ss_ab *= nf;

    let mut ss_as = 0.0;
    let mut ss_bs = 0.0;
    let mut ss_abs = 0.0;
    for (i, row) in data.iter().enumerate() {
        let sa = [0, 1].map(|j| (row[cell(j, 0)] + row[cell(j, 1)]) / 2.0);
        let sb = [0, 1].map(|k| (row[cell(0, k)] + row[cell(1, k)]) / 2.0);
        for j in 0..2 {
            ss_as += 2.0 * (sa[j] - subj[i] - a_mean[j] + grand).powi(2);
            ss_bs += 2.0 * (sb[j] - subj[i] - b_mean[j] + grand).powi(2);
        }
        for j in 0..2 {
            for k in 0..2 {
                let resid = row[cell(j, k)] - sa[j] - sb[k] + subj[i] - cell_mean[cell(j, k)] + a_mean[j] + b_mean[k]
                    - grand;
                ss_abs += resid.powi(2);
            }
        }
    }

    let scale = ss_total.max(f64::MIN_POSITIVE);
    Ok(AnovaResult {
        a: effect(ss_a, ss_as, n, scale)?,
        b: effect(ss_b, ss_bs, n, scale)?,
        ab: effect(ss_ab, ss_abs, n, scale)?,
        ss_subjects,
        ss_total,
        n_subjects: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Per-subject contrast route: each 1-df within effect is a one-sample t on
    /// a contrast score, F = t^2 and SS = n mean(c)^2 / 4.
    fn contrast_oracle(data: &[[f64; 4]]) -> [(f64, f64, f64); 3] {
        let weights = [[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
        let n = data.len() as f64;
        weights.map(|w| {
            let c: Vec<f64> = data.iter().map(|r| (0..4).map(|i| w[i] * r[i]).sum()).collect();
            let m = c.iter().sum::<f64>() / n;
            let ss_dev: f64 = c.iter().map(|v| (v - m).powi(2)).sum();
            let f = n * m * m / (ss_dev / (n - 1.0));
            (f, n * m * m / 4.0, ss_dev / 4.0)
        })
    }

    fn check_against_oracle(data: &[[f64; 4]]) {
        let r = rm_anova_2x2(data).unwrap();
        for (eff, (f, ss, sse)) in [r.a, r.b, r.ab].iter().zip(contrast_oracle(data)) {
            assert!((eff.f - f).abs() <= 1e-10 * f.abs().max(1e-300), "{} vs {f}", eff.f);
            assert!((eff.ss - ss).abs() <= 1e-10 * ss.abs().max(1e-12));
            assert!((eff.ss_error - sse).abs() <= 1e-10 * sse.abs().max(1e-12));
            assert!((eff.partial_eta_sq - ss / (ss + sse)).abs() < 1e-12);
            assert_eq!((eff.df_num, eff.df_den), (1.0, (data.len() - 1) as f64));
        }
    }

    #[test]
    fn three_subject_hand_data() {
        // cells: A1B1 A1B2 A2B1 A2B2
        let data = [[3.0, 5.0, 4.0, 8.0], [2.0, 6.0, 3.0, 9.0], [4.0, 4.0, 6.0, 7.0]];
        let r = rm_anova_2x2(&data).unwrap();
        // By hand: grand mean 61/12; A contrasts c = (A1 - A2 sums) -4, -4, -5
        // mean -13/3, deviations 1/3, 1/3, -2/3 -> SS_dev 2/3
        // F_A = 3 * (169/9) / ((2/3) / 2) = 169
        assert!((r.a.f - 169.0).abs() < 1e-10 * 169.0, "{}", r.a.f);
        assert!((r.a.ss - 3.0 * 169.0 / 9.0 / 4.0).abs() < 1e-12);
        check_against_oracle(&data);
    }

    #[test]
    fn matches_contrast_oracle_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3, 5, 29] {
            let data: Vec<[f64; 4]> =
                (0..n).map(|_| std::array::from_fn(|c| rng.random_range(-2.0..2.0) + c as f64 * 0.3)).collect();
            check_against_oracle(&data);
        }
    }

    #[test]
    fn sums_of_squares_partition_the_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<[f64; 4]> = (0..12).map(|_| std::array::from_fn(|_| rng.random_range(0.0..10.0))).collect();
        let r = rm_anova_2x2(&data).unwrap();
        let parts = r.ss_subjects + r.a.ss + r.a.ss_error + r.b.ss + r.b.ss_error + r.ab.ss + r.ab.ss_error;
        assert!((parts - r.ss_total).abs() <= 1e-9 * r.ss_total);
    }

    #[test]
    fn subject_offsets_do_not_change_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<[f64; 4]> = (0..10).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
        let shifted: Vec<[f64; 4]> = data
            .iter()
            .map(|r| {
                let off = rng.random_range(-50.0..50.0);
                r.map(|v| v + off)
            })
            .collect();
        let (x, y) = (rm_anova_2x2(&data).unwrap(), rm_anova_2x2(&shifted).unwrap());
        for (e1, e2) in [(x.a, y.a), (x.b, y.b), (x.ab, y.ab)] {
            assert!((e1.f - e2.f).abs() <= 1e-10 * e1.f.abs(), "{} vs {}", e1.f, e2.f);
        }
    }

    #[test]
    fn pure_subject_offsets_give_zero_f() {
        let data = [[1.0; 4], [5.0; 4], [-2.0; 4]];
        let r = rm_anova_2x2(&data).unwrap();
        assert_eq!([r.a.f, r.b.f, r.ab.f], [0.0; 3]);
        // equal condition means with noise
        let data = [[1.0, 2.0, 2.0, 1.0], [2.0, 1.0, 1.0, 2.0], [1.5, 1.5, 1.5, 1.5]];
        let r = rm_anova_2x2(&data).unwrap();
        assert!(r.a.f.abs() < 1e-12 && r.b.f.abs() < 1e-12 && r.ab.f.abs() < 1e-12);
    }

    #[test]
    fn incomplete_designs() {
        assert!(matches!(rm_anova_2x2(&[[1.0, 2.0, 3.0, 4.0]]), Err(AnalysisError::IncompleteDesign(_))));
        assert!(matches!(
            rm_anova_2x2(&[[1.0, 2.0, 3.0, 4.0], [1.0, f64::NAN, 3.0, 4.0]]),
            Err(AnalysisError::IncompleteDesign(_))
        ));
    }
}
