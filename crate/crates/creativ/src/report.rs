//! Report rendering: JSON at full precision, CSV and markdown at 4 decimal
//! places, a model-comparison table sorted by creativity, and a plain
//! columnar plot-data file. All renderings are deterministic byte-for-byte.

use std::path::Path;

use crate::metrics::{MetricFlag, MetricReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {msg}")]
    UnwritableOutput { path: String, msg: String },
    #[error("duplicate model id `{0}`")]
    DuplicateModelId(String),
}

pub const METRIC_COLUMNS: [&str; 6] = [
    "functionality",
    "fluency",
    "flexibility",
    "originality",
    "elaboration",
    "creativity",
];

fn column_value(report: &MetricReport, column: &str) -> Option<f64> {
    match column {
        "functionality" => report.functionality,
        "fluency" => report.fluency,
        "flexibility" => report.flexibility,
        "originality" => report.originality,
        "elaboration" => report.elaboration,
        "creativity" => report.creativity,
        _ => None,
    }
}

fn fmt4(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

/// Footnote markers per column, from flags that name a metric. Markers are
/// numbered in flag order so the table and the footnote list line up.
fn column_markers(flags: &[MetricFlag]) -> Vec<(usize, &MetricFlag)> {
    flags.iter().enumerate().map(|(i, f)| (i + 1, f)).collect()
}

pub fn render_report(report: &MetricReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(
                "model,functionality,fluency,flexibility,originality,elaboration,creativity\n",
            );
            s.push_str(&report.model_id);
            for col in METRIC_COLUMNS {
                s.push(',');
                s.push_str(&fmt4(column_value(report, col)));
            }
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(std::slice::from_ref(report), false),
    }
}

fn render_markdown(reports: &[MetricReport], bold_best: bool) -> String {
    let mut best: [Option<f64>; 6] = [None; 6];
    if bold_best {
        for (i, col) in METRIC_COLUMNS.iter().enumerate() {
            best[i] = reports
                .iter()
                .filter_map(|r| column_value(r, col))
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        }
    }

    let mut s = String::from(
        "| Model | Functionality | Fluency | Flexibility | Originality | Elaboration | Creativity |\n\
         |---|---|---|---|---|---|---|\n",
    );
    let mut footnotes: Vec<String> = Vec::new();
    for report in reports {
        s.push_str("| ");
        s.push_str(&report.model_id);
        let markers = column_markers(&report.flags);
        for (i, col) in METRIC_COLUMNS.iter().enumerate() {
            s.push_str(" | ");
            let value = column_value(report, col);
            let mut cell = fmt4(value);
            if bold_best {
                if let (Some(v), Some(b)) = (value, best[i]) {
                    if v == b {
                        cell = format!("**{cell}**");
                    }
                }
            }
            for (k, flag) in &markers {
                if flag.metric.as_deref() == Some(col) {
                    cell.push_str(&format!("[{k}]"));
                }
            }
            s.push_str(&cell);
        }
        s.push_str(" |\n");
        for (k, flag) in markers {
            footnotes.push(format!("[{k}] {} ({})", flag.detail, report.model_id));
        }
    }
    if !footnotes.is_empty() {
        s.push('\n');
        for note in footnotes {
            s.push_str(&note);
            s.push('\n');
        }
    }
    s
}

fn write(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content).map_err(|e| ReportError::UnwritableOutput {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// report.json / report.csv / report.md under the output directory.
pub fn write_report_files(report: &MetricReport, out_dir: &Path) -> Result<(), ReportError> {
    write(&out_dir.join("report.json"), &render_report(report, ReportFormat::Json))?;
    write(&out_dir.join("report.csv"), &render_report(report, ReportFormat::Csv))?;
    write(&out_dir.join("report.md"), &render_report(report, ReportFormat::Markdown))
}

pub struct Comparison {
    pub markdown: String,
    pub plotdata: String,
    /// Model ids in ranked order (creativity descending, id as tie-break).
    pub ranking: Vec<String>,
}

/// Merge reports into one table sorted by creativity descending (missing
/// creativity sorts last; ties break on model id), bold the best value per
/// metric, and emit plot data as plain columns.
pub fn compare_models(reports: &[MetricReport]) -> Result<Comparison, ReportError> {
    let mut seen = std::collections::HashSet::new();
    for r in reports {
        if !seen.insert(r.model_id.as_str()) {
            return Err(ReportError::DuplicateModelId(r.model_id.clone()));
        }
    }

    let mut ordered: Vec<&MetricReport> = reports.iter().collect();
    ordered.sort_by(|a, b| match (a.creativity, b.creativity) {
        (Some(ca), Some(cb)) => cb
            .partial_cmp(&ca)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.model_id.cmp(&b.model_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model_id.cmp(&b.model_id),
    });

    let owned: Vec<MetricReport> = ordered.iter().map(|r| (*r).clone()).collect();
    let markdown = render_markdown(&owned, true);

    let mut plotdata = String::from(
        "# model functionality fluency flexibility originality elaboration creativity\n",
    );
    for r in &owned {
        plotdata.push_str(&r.model_id);
        for col in METRIC_COLUMNS {
            plotdata.push(' ');
            match column_value(r, col) {
                Some(v) => plotdata.push_str(&format!("{v}")),
                None => plotdata.push_str("nan"),
            }
        }
        plotdata.push('\n');
    }

    Ok(Comparison {
        markdown,
        plotdata,
        ranking: owned.iter().map(|r| r.model_id.clone()).collect(),
    })
}

/// comparison.md and plotdata.txt under the output directory.
pub fn write_comparison_files(cmp: &Comparison, out_dir: &Path) -> Result<(), ReportError> {
    write(&out_dir.join("comparison.md"), &cmp.markdown)?;
    write(&out_dir.join("plotdata.txt"), &cmp.plotdata)
}
