use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use super::{CorrelationRow, GroupMeans, SweepPoint};
use crate::baseline::format_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Scoring conventions stated in every JSON report.
pub const CONVENTIONS: [&str; 4] = [
    "empty prediction and empty truth: precision = recall = f1 = 1",
    "empty prediction, non-empty truth: precision = 0",
    "empty truth, non-empty prediction: recall = 0",
    "granularity mismatch or failed run: precision = recall = f1 = 0",
];

const COLUMNS: [&str; 6] = ["group", "n", "ga", "precision", "recall", "f1"];

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[derive(Serialize)]
struct RowOut<'a> {
    group: &'a str,
    n: usize,
    ga: Box<RawValue>,
    precision: Box<RawValue>,
    recall: Box<RawValue>,
    f1: Box<RawValue>,
}

#[derive(Serialize)]
struct ReportOut<'a> {
    conventions: &'a [&'a str],
    rows: Vec<RowOut<'a>>,
}

#[derive(Deserialize)]
struct ReportIn {
    rows: Vec<GroupMeans>,
}

fn fixed(v: f64) -> Box<RawValue> {
    RawValue::from_string(format_score(v)).expect("decimal literal")
}

/// Renders group rows in the given order with six-decimal floats.
pub fn emit_report(rows: &[GroupMeans], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => csv_text(
            &COLUMNS,
            rows.iter().map(|r| {
                vec![
                    r.group.clone(),
                    r.n.to_string(),
                    format_score(r.ga),
                    format_score(r.precision),
                    format_score(r.recall),
                    format_score(r.f1),
                ]
            }),
        ),
        ReportFormat::Json => {
            let out = ReportOut {
                conventions: &CONVENTIONS,
                rows: rows
                    .iter()
                    .map(|r| RowOut {
                        group: &r.group,
                        n: r.n,
                        ga: fixed(r.ga),
                        precision: fixed(r.precision),
                        recall: fixed(r.recall),
                        f1: fixed(r.f1),
                    })
                    .collect(),
            };
            let mut text = serde_json::to_string_pretty(&out).expect("serializable report");
            text.push('\n');
            text
        }
    }
}

pub fn load_report_json(text: &str) -> Result<Vec<GroupMeans>, ReportError> {
    Ok(serde_json::from_str::<ReportIn>(text)?.rows)
}

fn optional(v: Option<f64>) -> String {
    v.map(format_score).unwrap_or_default()
}

pub fn correlations_csv(rows: &[CorrelationRow]) -> String {
    csv_text(
        &["metric", "n", "rho", "p_two_sided", "method", "length_unit", "note"],
        rows.iter().map(|r| {
            vec![
                r.metric.clone(),
                r.n.to_string(),
                optional(r.rho),
                optional(r.p_two_sided),
                serde_json::to_value(r.method)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                "whitespace_tokens".to_string(),
                r.note.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    csv_text(
        &["k", "n", "precision", "recall", "f1"],
        points.iter().map(|p| {
            vec![
                p.k.to_string(),
                p.n.to_string(),
                format_score(p.precision),
                format_score(p.recall),
                format_score(p.f1),
            ]
        }),
    )
}
