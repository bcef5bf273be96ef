//! CSV and JSON renderings of experiment results.

use serde::Serialize;

use pml_core::metrics::MetricReport;
use pml_core::solver::SchirnParams;
use pml_core::{PmlError, Result};

use crate::experiment::{AblationResult, CvResult, GridRow};

/// A named output file and its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    pub fn new(file: impl Into<String>, contents: impl Into<Vec<u8>>) -> Self {
        Artifact {
            file: file.into(),
            contents: contents.into(),
        }
    }
}

pub fn json<T: Serialize>(file: &str, value: &T) -> Result<Artifact> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| PmlError::Config(format!("cannot serialize {file}: {e}")))?;
    text.push('\n');
    Ok(Artifact::new(file, text))
}

/// Column headers for the five metrics, naming the conventions behind them.
pub fn metric_headers(threshold: f64) -> [String; 5] {
    [
        "average_precision".into(),
        "ranking_loss".into(),
        "coverage (normalized by l)".into(),
        format!("hamming_loss (threshold {threshold})"),
        "one_error".into(),
    ]
}

fn std_headers(threshold: f64) -> Vec<String> {
    metric_headers(threshold)
        .iter()
        .map(|h| match h.split_once(' ') {
            Some((name, rest)) => format!("{name}_std {rest}"),
            None => format!("{h}_std"),
        })
        .collect()
}

fn numbers(values: [f64; 5]) -> impl Iterator<Item = String> {
    values.into_iter().map(|v| v.to_string())
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: Vec<String>) -> Result<Self> {
        let mut t = Table {
            w: csv::Writer::from_writer(Vec::new()),
        };
        t.row(header)?;
        Ok(t)
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.w
            .write_record(&fields)
            .map_err(|e| PmlError::Config(format!("csv: {e}")))
    }

    fn finish(self, file: &str) -> Result<Artifact> {
        let bytes = self
            .w
            .into_inner()
            .map_err(|e| PmlError::Config(format!("csv: {e}")))?;
        Ok(Artifact::new(file, bytes))
    }
}

/// `k` fold rows, then a `mean` row carrying the sample standard deviations.
pub fn cv_csv(file: &str, cv: &CvResult, params: &SchirnParams<f64>) -> Result<Artifact> {
    let mut header = vec!["fold".to_string()];
    header.extend(metric_headers(params.threshold));
    header.extend(std_headers(params.threshold));
    header.extend([
        "scored_rows".into(),
        "variant".into(),
        "c_shift_convention".into(),
    ]);
    let mut t = Table::new(header)?;
    let tail = |scored: usize| {
        vec![
            scored.to_string(),
            params.variant.to_string(),
            params.c_shift.to_string(),
        ]
    };
    for (i, f) in cv.folds.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(numbers(f.values()));
        row.extend(std::iter::repeat_n(String::new(), 5));
        row.extend(tail(f.scored_rows));
        t.row(row)?;
    }
    let mut row = vec!["mean".to_string()];
    row.extend(numbers(cv.mean.values()));
    row.extend(numbers(cv.std.values()));
    row.extend(tail(cv.folds.iter().map(|f| f.scored_rows).sum()));
    t.row(row)?;
    t.finish(file)
}

pub fn grid_csv(file: &str, rows: &[GridRow], params: &SchirnParams<f64>) -> Result<Artifact> {
    let mut header: Vec<String> = ["rank", "alpha", "beta", "lambda"]
        .map(String::from)
        .to_vec();
    header.extend(metric_headers(params.threshold).map(|h| format!("mean {h}")));
    header.extend(std_headers(params.threshold));
    header.extend(["best", "variant", "c_shift_convention"].map(String::from));
    let mut t = Table::new(header)?;
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.lambda.to_string(),
        ];
        row.extend(numbers(r.cv.mean.values()));
        row.extend(numbers(r.cv.std.values()));
        row.extend([
            r.best.to_string(),
            params.variant.to_string(),
            params.c_shift.to_string(),
        ]);
        t.row(row)?;
    }
    t.finish(file)
}

pub fn ablation_csv(
    file: &str,
    result: &AblationResult,
    params: &SchirnParams<f64>,
) -> Result<Artifact> {
    let mut header = vec!["variant".to_string()];
    header.extend(metric_headers(params.threshold).map(|h| format!("mean {h}")));
    header.extend(std_headers(params.threshold));
    header.extend([
        "ap_ttest_vs_high_rank".to_string(),
        "c_shift_convention".to_string(),
    ]);
    let mut t = Table::new(header)?;
    for r in &result.rows {
        let verdict = result
            .high_rank_vs
            .iter()
            .find(|c| c.versus == r.variant)
            .map(|c| format!("{:?}", c.verdict.flipped()).to_lowercase())
            .unwrap_or_default();
        let mut row = vec![r.variant.to_string()];
        row.extend(numbers(r.cv.mean.values()));
        row.extend(numbers(r.cv.std.values()));
        row.extend([verdict, params.c_shift.to_string()]);
        t.row(row)?;
    }
    t.finish(file)
}

pub fn metrics_csv(file: &str, report: &MetricReport, threshold: f64) -> Result<Artifact> {
    let mut header = metric_headers(threshold).to_vec();
    header.extend(["scored_rows".into(), "total_rows".into()]);
    let mut t = Table::new(header)?;
    let mut row: Vec<String> = numbers(report.values()).collect();
    row.extend([
        report.scored_rows.to_string(),
        report.total_rows.to_string(),
    ]);
    t.row(row)?;
    t.finish(file)
}
