//! Depth-wise coverage tables, technique intersections, plot data files and
//! JSON campaign reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::CallGraph;
use crate::executor::CoverageMap;
use crate::orchestrator::{CampaignReport, Technique};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("plot data line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("depth tables are not aligned: {0}")]
    Misaligned(String),
    #[error("invalid report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: u32,
    pub covered: usize,
    pub total: usize,
    pub percent: u32,
}

/// `100 * covered / total` rounded half up; 0 for an empty total.
pub fn percent(covered: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    let (c, t) = (covered as u64, total as u64);
    ((200 * c + t) / (2 * t)) as u32
}

/// One row per call-graph depth that has functions. Unreachable functions are
/// not counted.
pub fn depth_table(coverage: &CoverageMap, cg: &CallGraph) -> Vec<DepthRow> {
    let mut rows: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (f, depth) in cg.depths() {
        let Some(d) = depth else { continue };
        let slot = rows.entry(*d).or_default();
        slot.1 += 1;
        if coverage.covers(f) {
            slot.0 += 1;
        }
    }
    rows.into_iter()
        .map(|(depth, (covered, total))| DepthRow {
            depth,
            covered,
            total,
            percent: percent(covered, total),
        })
        .collect()
}

/// Share of reachable functions covered by every technique of each pair, and
/// of the full set. Keys are sorted technique names.
pub fn intersection_report(named: &BTreeMap<String, CoverageMap>, cg: &CallGraph) -> BTreeMap<Vec<String>, u32> {
    let names: Vec<&String> = named.keys().collect();
    let mut groups: Vec<Vec<&String>> = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            groups.push(vec![names[i], names[j]]);
        }
    }
    if names.len() > 2 {
        groups.push(names.clone());
    }
    let reachable: BTreeSet<&str> = cg.reachable().collect();
    groups
        .into_iter()
        .map(|g| {
            let common = reachable
                .iter()
                .filter(|f| g.iter().all(|n| named[*n].covers(f)))
                .count();
            (g.into_iter().cloned().collect(), percent(common, reachable.len()))
        })
        .collect()
}

/// Tab-separated `depth covered total percent` with a header line.
pub fn render_depth_tsv(rows: &[DepthRow]) -> String {
    let mut out = String::from("depth\tcovered\ttotal\tpercent\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.depth, r.covered, r.total, r.percent);
    }
    out
}

/// Booktabs table of per-depth percentages, one column per technique.
pub fn render_depth_latex(caption: &str, label: &str, columns: &[&str], rows: &[(u32, Vec<u32>)]) -> String {
    let mut out = String::new();
    out.push_str("\\begin{table}[h!]\n    \\centering\n");
    let _ = writeln!(out, "    \\caption{{{caption}}}");
    let _ = writeln!(out, "    \\label{{{label}}}");
    let _ = writeln!(
        out,
        "    \\begin{{tabular}}{{@{{}} {}@{{}}}}",
        vec!["c"; columns.len() + 1].join(" ")
    );
    out.push_str("        \\toprule\n");
    let header: Vec<String> = std::iter::once("Depth".to_string())
        .chain(columns.iter().map(|c| format!("{c} (\\%)")))
        .collect();
    let _ = writeln!(out, "        {} \\\\ \\midrule", header.join(" & "));
    let depth_w = rows.iter().map(|(d, _)| d.to_string().len()).max().unwrap_or(1);
    for (i, (depth, values)) in rows.iter().enumerate() {
        let cells: Vec<String> = std::iter::once(format!("{depth:<depth_w$}"))
            .chain(values.iter().map(|v| format!("{v:<3}")))
            .collect();
        let line = cells.join(" & ");
        let end = if i + 1 == rows.len() {
            " \\\\ \\bottomrule"
        } else {
            " \\\\"
        };
        let _ = writeln!(out, "        {}{end}", line.trim_end());
    }
    out.push_str("    \\end{tabular}\n\\end{table}\n");
    out
}

/// One line of a plot file: depth then the four technique percentages.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotRow {
    pub depth: u32,
    pub values: [f64; 4],
}

fn format_number(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        let s = format!("{r:.2}");
        s.trim_end_matches('0').to_string()
    }
}

/// Combines four depth tables (SymexOnly, AFL-like, FS, SF) sharing a depth axis.
pub fn plot_rows(tables: [&[DepthRow]; 4]) -> Result<Vec<PlotRow>, ReportError> {
    let axis: Vec<u32> = tables[0].iter().map(|r| r.depth).collect();
    for t in &tables[1..] {
        let other: Vec<u32> = t.iter().map(|r| r.depth).collect();
        if other != axis {
            return Err(ReportError::Misaligned(format!("{axis:?} vs {other:?}")));
        }
    }
    Ok(axis
        .iter()
        .enumerate()
        .map(|(i, &depth)| PlotRow {
            depth,
            values: [0, 1, 2, 3].map(|k| f64::from(tables[k][i].percent)),
        })
        .collect())
}

pub fn render_plot_dat(rows: &[PlotRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = write!(out, "{}", r.depth);
        for v in r.values {
            let _ = write!(out, " {}", format_number(v));
        }
        out.push('\n');
    }
    out
}

/// Writes the plot file for four aligned depth tables.
pub fn emit_plot_dat(tables: [&[DepthRow]; 4], path: &Path) -> Result<(), ReportError> {
    let rows = plot_rows(tables)?;
    std::fs::write(path, render_plot_dat(&rows))?;
    Ok(())
}

/// Parses a plot file. Blank lines and `#` comments are skipped.
pub fn parse_plot_dat(text: &str) -> Result<Vec<PlotRow>, ReportError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ReportError::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 columns, found {}", fields.len())));
        }
        let depth = fields[0]
            .parse::<u32>()
            .map_err(|e| err(format!("bad depth `{}`: {e}", fields[0])))?;
        let mut values = [0.0; 4];
        for (slot, f) in values.iter_mut().zip(&fields[1..]) {
            *slot = f.parse::<f64>().map_err(|e| err(format!("bad value `{f}`: {e}")))?;
        }
        rows.push(PlotRow { depth, values });
    }
    Ok(rows)
}

/// Per-depth arithmetic mean over several plot files; a depth is averaged
/// over the files that have it. Values are rounded to two decimals.
pub fn average_plot_data(files: &[Vec<PlotRow>]) -> Vec<PlotRow> {
    let mut acc: BTreeMap<u32, ([f64; 4], usize)> = BTreeMap::new();
    for rows in files {
        for r in rows {
            let slot = acc.entry(r.depth).or_insert(([0.0; 4], 0));
            for k in 0..4 {
                slot.0[k] += r.values[k];
            }
            slot.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(depth, (sum, n))| PlotRow {
            depth,
            values: sum.map(|s| (s / n as f64 * 100.0).round() / 100.0),
        })
        .collect()
}

/// Pretty JSON of a campaign report.
pub fn report_to_json(report: &CampaignReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// The report JSON with the `duration` field removed, for comparing runs.
pub fn report_to_json_without_duration(report: &CampaignReport) -> String {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("duration");
    }
    serde_json::to_string_pretty(&v).expect("value serializes")
}

pub fn report_from_json(text: &str) -> Result<CampaignReport, ReportError> {
    Ok(serde_json::from_str(text)?)
}

/// Rows of a summary line per technique: percent, queries and executions.
pub fn render_summary_tsv(reports: &[CampaignReport]) -> String {
    let mut out = String::from("technique\tcovered\ttotal\tpercent\tqueries\texecutions\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.technique,
            r.covered(),
            r.total(),
            r.percent(),
            r.solver_stats.queries,
            r.executions
        );
    }
    out
}

/// Looks up a report by technique.
pub fn find_report(reports: &[CampaignReport], t: Technique) -> Option<&CampaignReport> {
    reports.iter().find(|r| r.technique == t)
}
