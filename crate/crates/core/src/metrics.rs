//! Multi-label ranking and classification metrics.
//!
//! Conventions:
//! - Labels are ranked 1.. by descending score; equal scores are ordered by
//!   ascending label index.
//! - In ranking loss a pair (relevant j, irrelevant k) counts as misordered
//!   when `score_j <= score_k`.
//! - Coverage is `(max relevant rank − 1) / l`, i.e. normalized by the label count.
//! - Rows whose truth is all zeros or all ones have no relevant/irrelevant
//!   contrast and are left out of the four ranking metrics; hamming loss uses
//!   every row. With no scorable row a ranking metric reports 0 and the
//!   report's `scored_rows` is 0.

use serde::Serialize;

use crate::error::{PmlError, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub average_precision: f64,
    pub ranking_loss: f64,
    pub coverage: f64,
    pub hamming_loss: f64,
    pub one_error: f64,
    /// Rows that entered the ranking metrics.
    pub scored_rows: usize,
    pub total_rows: usize,
}

impl MetricReport {
    pub const NAMES: [&'static str; 5] = [
        "average_precision",
        "ranking_loss",
        "coverage",
        "hamming_loss",
        "one_error",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.average_precision,
            self.ranking_loss,
            self.coverage,
            self.hamming_loss,
            self.one_error,
        ]
    }
}

fn check_shapes<T: Scalar>(
    scores: &DenseMatrix<T>,
    truth: &DenseMatrix<T>,
    op: &'static str,
) -> Result<()> {
    scores.check_same_shape(truth, op)?;
    if !truth.is_binary() {
        return Err(PmlError::contract(op, "truth must be binary"));
    }
    Ok(())
}

/// 1-based rank of each label in one row.
fn ranks<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; scores.len()];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos + 1;
    }
    rank
}

/// Relevant label indices, or `None` for rows without a relevant/irrelevant split.
fn relevant<T: Scalar>(truth: &[T]) -> Option<Vec<usize>> {
    let rel: Vec<usize> = (0..truth.len()).filter(|&j| truth[j] == T::one()).collect();
    if rel.is_empty() || rel.len() == truth.len() {
        None
    } else {
        Some(rel)
    }
}

/// Mean of `per_row` over scorable rows, plus the number of such rows.
fn ranking_mean<T: Scalar>(
    scores: &DenseMatrix<T>,
    truth: &DenseMatrix<T>,
    per_row: impl Fn(&[T], &[T], &[usize]) -> f64,
) -> (f64, usize) {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..scores.rows() {
        let (s, t) = (scores.row(i), truth.row(i));
        if let Some(rel) = relevant(t) {
            total += per_row(s, t, &rel);
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (total / count as f64, count)
    }
}

fn ap_row<T: Scalar>(s: &[T], _t: &[T], rel: &[usize]) -> f64 {
    let rank = ranks(s);
    let mut rel_ranks: Vec<usize> = rel.iter().map(|&j| rank[j]).collect();
    rel_ranks.sort_unstable();
    // The k-th smallest relevant rank has exactly k relevant labels at or above it.
    let sum: f64 = rel_ranks
        .iter()
        .enumerate()
        .map(|(k, &r)| (k + 1) as f64 / r as f64)
        .sum();
    sum / rel.len() as f64
}

fn ranking_loss_row<T: Scalar>(s: &[T], t: &[T], rel: &[usize]) -> f64 {
    let irrel: Vec<usize> = (0..t.len()).filter(|&k| t[k] != T::one()).collect();
    let bad = rel
        .iter()
        .map(|&j| irrel.iter().filter(|&&k| s[j] <= s[k]).count())
        .sum::<usize>();
    bad as f64 / (rel.len() * irrel.len()) as f64
}

fn coverage_row<T: Scalar>(s: &[T], _t: &[T], rel: &[usize]) -> f64 {
    let rank = ranks(s);
    let deepest = rel
        .iter()
        .map(|&j| rank[j])
        .max()
        .expect("non-empty relevant set");
    (deepest - 1) as f64 / s.len() as f64
}

fn one_error_row<T: Scalar>(s: &[T], t: &[T], _rel: &[usize]) -> f64 {
    let rank = ranks(s);
    let top = rank.iter().position(|&r| r == 1).expect("rank 1 exists");
    if t[top] == T::one() {
        0.0
    } else {
        1.0
    }
}

pub fn average_precision<T: Scalar>(
    scores: &DenseMatrix<T>,
    truth: &DenseMatrix<T>,
) -> Result<f64> {
    check_shapes(scores, truth, "average_precision")?;
    Ok(ranking_mean(scores, truth, ap_row).0)
}

pub fn ranking_loss<T: Scalar>(scores: &DenseMatrix<T>, truth: &DenseMatrix<T>) -> Result<f64> {
    check_shapes(scores, truth, "ranking_loss")?;
    Ok(ranking_mean(scores, truth, ranking_loss_row).0)
}

pub fn coverage<T: Scalar>(scores: &DenseMatrix<T>, truth: &DenseMatrix<T>) -> Result<f64> {
    check_shapes(scores, truth, "coverage")?;
    Ok(ranking_mean(scores, truth, coverage_row).0)
}

pub fn one_error<T: Scalar>(scores: &DenseMatrix<T>, truth: &DenseMatrix<T>) -> Result<f64> {
    check_shapes(scores, truth, "one_error")?;
    Ok(ranking_mean(scores, truth, one_error_row).0)
}

/// Fraction of entries where the binary prediction differs from the truth.
pub fn hamming_loss<T: Scalar>(pred: &DenseMatrix<T>, truth: &DenseMatrix<T>) -> Result<f64> {
    pred.check_same_shape(truth, "hamming_loss")?;
    if !pred.is_binary() || !truth.is_binary() {
        return Err(PmlError::contract("hamming_loss", "inputs must be binary"));
    }
    let wrong = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / pred.as_slice().len() as f64)
}

pub fn evaluate_all<T: Scalar>(
    scores: &DenseMatrix<T>,
    pred: &DenseMatrix<T>,
    truth: &DenseMatrix<T>,
) -> Result<MetricReport> {
    check_shapes(scores, truth, "evaluate_all")?;
    let (average_precision, scored_rows) = ranking_mean(scores, truth, ap_row);
    Ok(MetricReport {
        average_precision,
        ranking_loss: ranking_mean(scores, truth, ranking_loss_row).0,
        coverage: ranking_mean(scores, truth, coverage_row).0,
        hamming_loss: hamming_loss(pred, truth)?,
        one_error: ranking_mean(scores, truth, one_error_row).0,
        scored_rows,
        total_rows: truth.rows(),
    })
}
