//! `analyze`: trial logs to tidy per-participant and per-comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use voicecue_core::analysis::tables::{write_csv, AnovaRow, ComparisonRow, CueWeightRow, JndRow};
use voicecue_core::analysis::{jzs_bf10, rm_anova_2x2, summarize_jnds, t_test, TestKind, DEFAULT_R_SCALE};

use crate::logs::{cue_weight_rows, jnd_rows, read_lines, TrialLine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JndSummaryRow {
    pub interface: String,
    pub cue: String,
    pub start_delta_st: f64,
    pub n: usize,
    pub geometric_mean_st: f64,
    pub log_sd: f64,
    pub unconverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueWeightSummaryRow {
    pub interface: String,
    pub coefficient: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub jnds: Vec<JndRow>,
    pub cue_weights: Vec<CueWeightRow>,
    pub jnd_summary: Vec<JndSummaryRow>,
    pub cue_weight_summary: Vec<CueWeightSummaryRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub anova: Vec<AnovaRow>,
    pub notes: Vec<String>,
}

/// Accepts `trials.jsonl` files or directories containing one.
pub fn load_inputs(inputs: &[PathBuf]) -> Result<Vec<TrialLine>> {
    let mut lines = Vec::new();
    for p in inputs {
        let path = if p.is_dir() { p.join("trials.jsonl") } else { p.clone() };
        lines.extend(read_lines(&path).with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(lines)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 { (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd)
}

/// Paired when both interfaces share at least two participants, Welch otherwise.
fn compare(
    label: &str,
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
    notes: &mut Vec<String>,
) -> Option<ComparisonRow> {
    let shared: Vec<&String> = a.keys().filter(|k| b.contains_key(*k)).collect();
    let outcome = if shared.len() >= 2 {
        let xa: Vec<f64> = shared.iter().map(|k| a[*k]).collect();
        let xb: Vec<f64> = shared.iter().map(|k| b[*k]).collect();
        t_test(&xa, &xb, TestKind::Paired).map(|t| (t, jzs_bf10(t.t, shared.len(), None, DEFAULT_R_SCALE).ok()))
    } else {
        let xa: Vec<f64> = a.values().copied().collect();
        let xb: Vec<f64> = b.values().copied().collect();
        t_test(&xa, &xb, TestKind::Welch)
            .map(|t| (t, jzs_bf10(t.t, xa.len(), Some(xb.len()), DEFAULT_R_SCALE).ok()))
    };
    match outcome {
        Ok((t, bf)) => Some(ComparisonRow::new(label, &t, bf.as_ref())),
        Err(e) => {
            notes.push(format!("{label}: {e}"));
            None
        }
    }
}

pub fn analyze(lines: &[TrialLine]) -> Result<Analysis> {
    let mut out = Analysis { jnds: jnd_rows(lines)?, ..Default::default() };
    let (weights, failures) = cue_weight_rows(lines);
    out.cue_weights = weights;
    out.notes.extend(failures.into_iter().map(|f| format!("cue-weight fit skipped: {f}")));

    // (interface, cue, start in milli-semitones) -> (converged JNDs, unconverged count, start)
    type Group = (Vec<f64>, usize, f64);
    let mut groups: BTreeMap<(String, String, i64), Group> = BTreeMap::new();
    for r in &out.jnds {
        let g = groups
            .entry((r.interface.clone(), r.cue.clone(), (r.start_delta_st * 1000.0).round() as i64))
            .or_insert((Vec::new(), 0, r.start_delta_st));
        match r.jnd_st {
            Some(j) => g.0.push(j),
            None => g.1 += 1,
        }
    }
    for ((interface, cue, _), (jnds, unconverged, start)) in &groups {
        if let Ok(s) = summarize_jnds(jnds) {
            out.jnd_summary.push(JndSummaryRow {
                interface: interface.clone(),
                cue: cue.clone(),
                start_delta_st: *start,
                n: s.n,
                geometric_mean_st: s.geometric_mean_st,
                log_sd: s.log_sd,
                unconverged_runs: *unconverged,
            });
        }
    }

    let interfaces: BTreeSet<String> =
        out.jnds.iter().map(|r| r.interface.clone()).chain(out.cue_weights.iter().map(|r| r.interface.clone())).collect();
    let interfaces: Vec<String> = interfaces.into_iter().collect();

    // per participant mean log JND per (interface, cue, direction)
    let mut cell: BTreeMap<(String, String, String, bool), Vec<f64>> = BTreeMap::new();
    for r in &out.jnds {
        if let Some(j) = r.jnd_st {
            cell.entry((r.participant.clone(), r.interface.clone(), r.cue.clone(), r.start_delta_st > 0.0))
                .or_default()
                .push(j.ln());
        }
    }
    let cell_mean = |p: &str, i: &str, c: &str, up: bool| -> Option<f64> {
        cell.get(&(p.into(), i.into(), c.into(), up)).map(|v| mean_sd(v).0)
    };
    let participants: BTreeSet<String> = out.jnds.iter().map(|r| r.participant.clone()).collect();

    let cues: BTreeSet<String> = out.jnds.iter().map(|r| r.cue.clone()).collect();
    for cue in &cues {
        let per_interface: Vec<BTreeMap<String, f64>> = interfaces
            .iter()
            .map(|i| {
                participants
                    .iter()
                    .filter_map(|p| {
                        let v: Vec<f64> = [false, true].iter().filter_map(|up| cell_mean(p, i, cue, *up)).collect();
                        (!v.is_empty()).then(|| (p.clone(), mean_sd(&v).0))
                    })
                    .collect()
            })
            .collect();
        if interfaces.len() == 2 {
            let label = format!("log jnd {cue}: {} vs {}", interfaces[0], interfaces[1]);
            out.comparisons.extend(compare(&label, &per_interface[0], &per_interface[1], &mut out.notes));

            let data: Vec<[f64; 4]> = participants
                .iter()
                .filter_map(|p| {
                    let c = [
                        cell_mean(p, &interfaces[0], cue, false)?,
                        cell_mean(p, &interfaces[0], cue, true)?,
                        cell_mean(p, &interfaces[1], cue, false)?,
                        cell_mean(p, &interfaces[1], cue, true)?,
                    ];
                    Some(c)
                })
                .collect();
            match rm_anova_2x2(&data) {
                Ok(a) => {
                    for (name, e) in [("interface", a.a), ("direction", a.b), ("interface:direction", a.ab)] {
                        out.anova.push(AnovaRow {
                            cue: cue.clone(),
                            effect: name.into(),
                            f: e.f,
                            df_num: e.df_num,
                            df_den: e.df_den,
                            p: e.p,
                            partial_eta_sq: e.partial_eta_sq,
                        });
                    }
                }
                Err(e) => out.notes.push(format!("anova {cue}: {e}")),
            }
        }
    }

    type Getter = fn(&CueWeightRow) -> f64;
    let coefficients: [(&str, Getter); 4] = [
        ("intercept_logit", |r| r.intercept_logit),
        ("w_f0_bk_per_st", |r| r.w_f0_bk_per_st),
        ("w_vtl_bk_per_st", |r| r.w_vtl_bk_per_st),
        ("intercept_logit_female", |r| r.intercept_logit_female),
    ];
    let mut weight_maps: Vec<Vec<BTreeMap<String, f64>>> = Vec::new();
    for interface in &interfaces {
        let rows: Vec<&CueWeightRow> = out.cue_weights.iter().filter(|r| &r.interface == interface).collect();
        let mut maps = Vec::new();
        for (name, get) in coefficients {
            let mut by_p: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &rows {
                by_p.entry(r.participant.clone()).or_default().push(get(r));
            }
            let map: BTreeMap<String, f64> = by_p.into_iter().map(|(k, v)| (k, mean_sd(&v).0)).collect();
            if !map.is_empty() {
                let values: Vec<f64> = map.values().copied().collect();
                let (mean, sd) = mean_sd(&values);
                out.cue_weight_summary.push(CueWeightSummaryRow {
                    interface: interface.clone(),
                    coefficient: name.into(),
                    n: values.len(),
                    mean,
                    sd,
                });
            }
            maps.push(map);
        }
        if !maps[1].is_empty() {
            let label = format!("cue weight f0 vs vtl: {interface}");
            out.comparisons.extend(compare(&label, &maps[1], &maps[2], &mut out.notes));
        }
        weight_maps.push(maps);
    }
    if interfaces.len() == 2 {
        for (k, (name, _)) in coefficients.iter().enumerate().take(3) {
            if weight_maps[0][k].is_empty() || weight_maps[1][k].is_empty() {
                continue;
            }
            let label = format!("{name}: {} vs {}", interfaces[0], interfaces[1]);
            out.comparisons.extend(compare(&label, &weight_maps[0][k], &weight_maps[1][k], &mut out.notes));
        }
    }
    Ok(out)
}

pub fn write_analysis(a: &Analysis, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(std::fs::File) -> Result<(), csv::Error>| -> Result<()> {
        let path = dir.join(name);
        f(std::fs::File::create(&path)?)?;
        written.push(path);
        Ok(())
    };
    if !a.jnds.is_empty() {
        put("jnds.csv", &|f| write_csv(f, &a.jnds))?;
        put("jnd_summary.csv", &|f| write_csv(f, &a.jnd_summary))?;
    }
    if !a.cue_weights.is_empty() {
        put("cue_weights.csv", &|f| write_csv(f, &a.cue_weights))?;
        put("cue_weight_summary.csv", &|f| write_csv(f, &a.cue_weight_summary))?;
    }
    put("comparisons.csv", &|f| write_csv(f, &a.comparisons))?;
    put("anova.csv", &|f| write_csv(f, &a.anova))?;
    Ok(written)
}
