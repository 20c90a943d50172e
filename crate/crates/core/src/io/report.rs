//! CSV reports: one row per run plus a summary row per instance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::solve::SolveOutcome;

pub const SUMMARY: &str = "summary";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub best: Option<f64>,
    pub mean: Option<f64>,
    /// Percent above the reference value.
    pub gap_to_reference: Option<f64>,
    pub time_s: f64,
    /// Run seed, or `summary`.
    pub seed: String,
}

/// Percent gap of `value` over `reference`.
pub fn gap_percent(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference.abs().max(f64::MIN_POSITIVE)
}

fn round_ms(s: f64) -> f64 {
    (s * 1000.0).round() / 1000.0
}

/// Run rows followed by the summary row (best and mean over feasible runs).
pub fn run_rows(instance: &str, outcomes: &[SolveOutcome], reference: Option<f64>) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = outcomes
        .iter()
        .map(|o| ReportRow {
            instance: instance.into(),
            best: o.cost(),
            mean: o.cost(),
            gap_to_reference: o.cost().zip(reference).map(|(c, r)| gap_percent(c, r)),
            time_s: round_ms(o.elapsed.as_secs_f64()),
            seed: o.seed.to_string(),
        })
        .collect();
    let costs: Vec<f64> = outcomes.iter().filter_map(|o| o.cost()).collect();
    let best = costs.iter().copied().reduce(f64::min);
    let mean = (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64);
    rows.push(ReportRow {
        instance: instance.into(),
        best,
        mean,
        gap_to_reference: best.zip(reference).map(|(c, r)| gap_percent(c, r)),
        time_s: round_ms(outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum()),
        seed: SUMMARY.into(),
    });
    rows
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| IoError::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| IoError::Parse(e.to_string()))
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), IoError> {
    std::fs::write(path, csv_string(rows)?).map_err(|e| IoError::io(path, e))
}

pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<(), IoError> {
    write_csv(rows, path)
}

pub fn parse_report_str(text: &str) -> Result<Vec<ReportRow>, IoError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::Parse(e.to_string()))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_report_str(&text).map_err(|e| e.in_file(path))
}
