//! Report output: JSON, CSV and markdown tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(CoreError::Format(other.to_string())),
        }
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => csv_report(report),
        ReportFormat::Markdown => Ok(markdown_report(report)),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per tag, a macro row, one row per class and a mean row.
/// Values are written at full precision.
fn csv_report(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CoreError::Io(std::io::Error::other(e));
    w.write_record(["kind", "name", "precision", "recall", "f1", "support", "accuracy"]).map_err(io)?;
    for m in &report.per_tag {
        w.write_record([
            "tag",
            m.tag.code(),
            &m.precision.to_string(),
            &m.recall.to_string(),
            &m.f1.to_string(),
            &m.support.to_string(),
            "",
        ])
        .map_err(io)?;
    }
    if report.macro_f1.is_some() {
        let support: usize = report.per_tag.iter().map(|m| m.support).sum();
        w.write_record([
            "macro",
            "Macro",
            &opt(report.macro_precision),
            &opt(report.macro_recall),
            &opt(report.macro_f1),
            &support.to_string(),
            "",
        ])
        .map_err(io)?;
    }
    for (field, acc) in &report.per_class_accuracy {
        w.write_record(["class", field.key(), "", "", "", "", &acc.to_string()]).map_err(io)?;
    }
    if let Some(mean) = report.mean_accuracy {
        w.write_record(["mean", "Average", "", "", "", "", &mean.to_string()]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CoreError::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| CoreError::Io(std::io::Error::other(e)))
}

fn markdown_report(report: &EvalReport) -> String {
    let mut out = String::new();
    if !report.per_tag.is_empty() {
        out.push_str("| Tag | Details | P | R | F1 | Support |\n|---|---|---|---|---|---|\n");
        for m in &report.per_tag {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {} |",
                m.tag.code(),
                m.tag.description(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        if let (Some(p), Some(r), Some(f)) = (report.macro_precision, report.macro_recall, report.macro_f1) {
            let support: usize = report.per_tag.iter().map(|m| m.support).sum();
            let _ = writeln!(out, "| Macro |  | {p:.2} | {r:.2} | {f:.2} | {support} |");
        }
    }
    if !report.per_class_accuracy.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&accuracy_markdown(&[("Accuracy (%)", report)]));
    }
    out
}

/// Class accuracy table with one column per labelled report.
pub fn accuracy_markdown(columns: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("| Class |");
    for (label, _) in columns {
        let _ = write!(out, " {label} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    for field in crate::record::Field::ALL {
        let _ = write!(out, "| {} |", field.key());
        for (_, r) in columns {
            match r.per_class_accuracy.get(field) {
                Some(v) => {
                    let _ = write!(out, " {v:.2} |");
                }
                None => out.push_str("  |"),
            }
        }
        out.push('\n');
    }
    out.push_str("| Average |");
    for (_, r) in columns {
        match r.mean_accuracy {
            Some(v) => {
                let _ = write!(out, " {v:.2} |");
            }
            None => out.push_str("  |"),
        }
    }
    out.push('\n');
    out
}
