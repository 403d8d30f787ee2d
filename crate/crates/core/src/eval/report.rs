//! Aggregated per-click benchmark reports and their file formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::simulate::RevisionTrace;
use crate::error::{Error, Result};

/// Mean DSC and HD95 after each click count, over `traces` sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub traces: usize,
    pub dsc: Vec<f64>,
    pub hd95_mm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub checkpoint: String,
    pub max_clicks: usize,
    pub organs: BTreeMap<String, CurveSummary>,
    /// Unweighted mean over all traces.
    pub overall: CurveSummary,
}

/// Trace-weighted combination of per-organ means, i.e. the plain mean over
/// every trace.
fn overall_of(organs: &BTreeMap<String, CurveSummary>, max_clicks: usize) -> CurveSummary {
    let traces: usize = organs.values().map(|o| o.traces).sum();
    let combine = |pick: &dyn Fn(&CurveSummary) -> &Vec<f64>| -> Vec<f64> {
        (0..=max_clicks)
            .map(|k| organs.values().map(|o| o.traces as f64 * pick(o)[k]).sum::<f64>() / traces as f64)
            .collect()
    };
    CurveSummary {
        traces,
        dsc: combine(&|o| &o.dsc),
        hd95_mm: combine(&|o| &o.hd95_mm),
    }
}

/// Averages traces per organ and overall at every click count.
pub fn aggregate(traces: &[RevisionTrace], dataset: &str, checkpoint: &str) -> Result<BenchmarkReport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidConfig("cannot aggregate zero traces".into()))?;
    let max_clicks = first.max_clicks();
    let mut groups: BTreeMap<String, Vec<&RevisionTrace>> = BTreeMap::new();
    for t in traces {
        if t.max_clicks() != max_clicks || t.metrics.len() != max_clicks + 1 {
            return Err(Error::MixedBudget(max_clicks, t.max_clicks()));
        }
        groups.entry(t.organ_id.clone()).or_default().push(t);
    }
    let organs = groups
        .into_iter()
        .map(|(organ, ts)| {
            let n = ts.len() as f64;
            let mean = |f: &dyn Fn(&RevisionTrace, usize) -> f64| -> Vec<f64> {
                (0..=max_clicks).map(|k| ts.iter().map(|t| f(t, k)).sum::<f64>() / n).collect()
            };
            let summary = CurveSummary {
                traces: ts.len(),
                dsc: mean(&|t, k| t.metrics[k].dsc),
                hd95_mm: mean(&|t, k| t.metrics[k].hd95_mm),
            };
            (organ, summary)
        })
        .collect();
    let overall = overall_of(&organs, max_clicks);
    Ok(BenchmarkReport {
        dataset: dataset.to_string(),
        checkpoint: checkpoint.to_string(),
        max_clicks,
        organs,
        overall,
    })
}

const CSV_HEADER: &str = "dataset,checkpoint,organ,clicks,traces,dsc,hd95_mm";

impl BenchmarkReport {
    /// One row per organ and click count. Values use the shortest
    /// representation that parses back to the same number.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (organ, s) in &self.organs {
            for k in 0..=self.max_clicks {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    self.dataset, self.checkpoint, organ, k, s.traces, s.dsc[k], s.hd95_mm[k]
                );
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Parse(format!("expected CSV header {CSV_HEADER:?}")));
        }
        let mut dataset = None;
        let mut checkpoint = None;
        let mut rows: BTreeMap<String, Vec<(usize, usize, f64, f64)>> = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let bad = |what: &str| Error::Parse(format!("CSV row {}: {what}", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad("expected 7 fields"));
            }
            dataset.get_or_insert_with(|| f[0].to_string());
            checkpoint.get_or_insert_with(|| f[1].to_string());
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
            rows.entry(f[2].to_string())
                .or_default()
                .push((int(f[3])?, int(f[4])?, num(f[5])?, num(f[6])?));
        }
        let max_clicks = rows
            .values()
            .next()
            .map(|r| r.len().saturating_sub(1))
            .ok_or_else(|| Error::Parse("CSV has no rows".into()))?;
        let mut organs = BTreeMap::new();
        for (organ, mut r) in rows {
            r.sort_by_key(|x| x.0);
            if r.len() != max_clicks + 1 || r.iter().enumerate().any(|(k, x)| x.0 != k) {
                return Err(Error::MixedBudget(max_clicks, r.len().saturating_sub(1)));
            }
            organs.insert(
                organ,
                CurveSummary {
                    traces: r[0].1,
                    dsc: r.iter().map(|x| x.2).collect(),
                    hd95_mm: r.iter().map(|x| x.3).collect(),
                },
            );
        }
        let overall = overall_of(&organs, max_clicks);
        Ok(Self {
            dataset: dataset.unwrap_or_default(),
            checkpoint: checkpoint.unwrap_or_default(),
            max_clicks,
            organs,
            overall,
        })
    }
}

/// `DSC/HD95(mm)` cell, e.g. `0.82/4.3`.
pub fn format_cell(dsc: f64, hd95_mm: f64) -> String {
    format!("{dsc:.2}/{hd95_mm:.1}")
}

fn click_label(k: usize) -> String {
    if k == 0 {
        "Initial".to_string()
    } else {
        format!("Click {k}")
    }
}

/// Tab-separated table with one row per click count and one column per
/// report: overall means as `DSC/HD95(mm)` cells.
pub fn render_table(reports: &[BenchmarkReport]) -> String {
    let mut out = String::from("DSC/HD95(mm)");
    for r in reports {
        out.push('\t');
        out.push_str(&r.dataset);
    }
    out.push('\n');
    let rows = reports.iter().map(|r| r.max_clicks).max().unwrap_or(0);
    for k in 0..=rows {
        out.push_str(&click_label(k));
        for r in reports {
            out.push('\t');
            if k <= r.max_clicks {
                out.push_str(&format_cell(r.overall.dsc[k], r.overall.hd95_mm[k]));
            }
        }
        out.push('\n');
    }
    out
}

/// Per-organ breakdown: one row per organ, one column per click count.
pub fn render_organ_table(report: &BenchmarkReport) -> String {
    let mut out = String::from("organ\ttraces");
    for k in 0..=report.max_clicks {
        out.push('\t');
        out.push_str(&click_label(k));
    }
    out.push('\n');
    for (organ, s) in &report.organs {
        let _ = write!(out, "{organ}\t{}", s.traces);
        for k in 0..=report.max_clicks {
            out.push('\t');
            out.push_str(&format_cell(s.dsc[k], s.hd95_mm[k]));
        }
        out.push('\n');
    }
    out
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub table: PathBuf,
    pub traces: Option<PathBuf>,
}

/// Writes `report.csv`, `report.json`, `table.txt` and, when traces are
/// given, `traces.jsonl` into `dir`.
pub fn emit_report(report: &BenchmarkReport, traces: Option<&[RevisionTrace]>, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    let table = format!("{}\n{}", render_table(std::slice::from_ref(report)), render_organ_table(report));
    let traces = match traces {
        Some(ts) => {
            let mut body = String::new();
            for t in ts {
                body.push_str(&serde_json::to_string(t).map_err(|e| Error::Parse(e.to_string()))?);
                body.push('\n');
            }
            Some(write("traces.jsonl", body)?)
        }
        None => None,
    };
    Ok(ReportFiles {
        csv: write("report.csv", report.to_csv())?,
        json: write("report.json", json)?,
        table: write("table.txt", table)?,
        traces,
    })
}
