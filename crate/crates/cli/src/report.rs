//! `report`: plain-text summary of `simulate` and `analyze` outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use serde::Deserialize;

const TABLES: [&str; 5] = ["jnd_summary.csv", "cue_weight_summary.csv", "comparisons.csv", "anova.csv", "durations.csv"];

#[derive(Debug, Deserialize)]
struct Duration {
    interface: String,
    experiment: String,
    n_trials: usize,
    duration_s: f64,
}

fn fmt_cell(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if s.contains('.') || s.contains('e') => {
            if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
                format!("{v:.3e}")
            } else {
                format!("{v:.4}")
            }
        }
        _ => s.to_string(),
    }
}

fn table(path: &Path) -> Result<String> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(fmt_cell).collect()))
        .collect::<Result<_, _>>()?;
    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "  {}", parts.join("  "));
    };
    line(&headers, &mut out);
    for r in &rows {
        line(r, &mut out);
    }
    Ok(out)
}

fn durations(path: &Path) -> Result<String> {
    let mut groups: BTreeMap<(String, String), Vec<(f64, usize)>> = BTreeMap::new();
    for row in csv::Reader::from_path(path)?.deserialize::<Duration>() {
        let row = row?;
        groups.entry((row.experiment, row.interface)).or_default().push((row.duration_s, row.n_trials));
    }
    let mut out = String::new();
    for ((experiment, interface), v) in groups {
        let n = v.len() as f64;
        let mean = v.iter().map(|x| x.0).sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        let trials = v.iter().map(|x| x.1 as f64).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "  {experiment:<10} {interface:<8} sessions {:>4}  duration {:>8.1} s (sd {:>6.1})  {:>6.1} trials/session  {:>5.2} s/trial",
            v.len(),
            mean,
            sd,
            trials,
            mean / trials
        );
    }
    Ok(out)
}

/// Render every known table found in `dirs`.
pub fn report(dirs: &[&Path]) -> Result<String> {
    let mut out = String::new();
    for dir in dirs {
        for name in TABLES {
            let path = dir.join(name);
            if !path.is_file() {
                continue;
            }
            let body = if name == "durations.csv" { durations(&path)? } else { table(&path)? };
            if body.trim().is_empty() {
                continue;
            }
            let _ = writeln!(out, "{}\n{body}", path.display());
        }
    }
    if out.is_empty() {
        anyhow::bail!("no result tables found");
    }
    Ok(out)
}
