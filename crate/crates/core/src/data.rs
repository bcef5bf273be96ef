//! Datasets, the matrix text format, noise injection and fold splitting.
//!
//! Matrix text format:
//!
//! ```text
//! <rows> <cols>
//! v11 v12 ... v1c
//! ...
//! vr1 vr2 ... vrc
//! ```
//!
//! The header is two ASCII decimal integers separated by a single space.
//! Body tokens are whitespace separated; LF or CRLF line endings are accepted
//! and the trailing newline is optional. Label files only admit the tokens
//! `0` and `1`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{PmlError, Result};
use crate::numerics::{self, DenseMatrix};
use crate::scalar::Scalar;

/// Which token grammar a matrix file must follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Any finite decimal, scientific notation allowed.
    Features,
    /// Only `0` and `1`.
    Labels,
}

/// Features, candidate labels and (optionally) ground truth for `n` samples.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub features: DenseMatrix<T>,
    /// Candidate label matrix: true labels plus noisy ones.
    pub candidates: DenseMatrix<T>,
    pub truth: Option<DenseMatrix<T>>,
    pub label_names: Option<Vec<String>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: DenseMatrix<T>,
        candidates: DenseMatrix<T>,
        truth: Option<DenseMatrix<T>>,
    ) -> Result<Self> {
        let ds = Dataset {
            features,
            candidates,
            truth,
            label_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "Dataset";
        if self.features.rows() != self.candidates.rows() {
            return Err(PmlError::dim(
                OP,
                format!(
                    "{} feature rows vs {} label rows",
                    self.features.rows(),
                    self.candidates.rows()
                ),
            ));
        }
        if !self.candidates.is_binary() {
            return Err(PmlError::contract(OP, "candidate labels must be binary"));
        }
        if let Some(t) = &self.truth {
            self.candidates.check_same_shape(t, OP)?;
            if !t.is_binary() {
                return Err(PmlError::contract(OP, "ground truth must be binary"));
            }
            let bad = t
                .as_slice()
                .iter()
                .zip(self.candidates.as_slice())
                .position(|(&g, &y)| g > y);
            if let Some(p) = bad {
                let l = t.cols();
                return Err(PmlError::contract(
                    OP,
                    format!("true label ({}, {}) is not a candidate", p / l, p % l),
                ));
            }
        }
        if let Some(names) = &self.label_names {
            if names.len() != self.candidates.cols() {
                return Err(PmlError::dim(
                    OP,
                    "label name count differs from label count",
                ));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_labels(&self) -> usize {
        self.candidates.cols()
    }

    /// Load `(features, labels[, truth])` files in the matrix text format.
    pub fn load(features: &Path, labels: &Path, truth: Option<&Path>) -> Result<Self> {
        let x = load_matrix(features, MatrixKind::Features)?;
        let y = load_matrix(labels, MatrixKind::Labels)?;
        let t = truth
            .map(|p| load_matrix(p, MatrixKind::Labels))
            .transpose()?;
        Self::new(x, y, t)
    }

    /// Subset of samples, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Ok(Dataset {
            features: self.features.select_rows(rows)?,
            candidates: self.candidates.select_rows(rows)?,
            truth: self
                .truth
                .as_ref()
                .map(|t| t.select_rows(rows))
                .transpose()?,
            label_names: self.label_names.clone(),
        })
    }

    /// Drop samples whose ground-truth row is empty. No-op without ground truth.
    pub fn filter_empty_truth(&self) -> Result<Self> {
        let Some(t) = &self.truth else {
            return Ok(self.clone());
        };
        let keep: Vec<usize> = t
            .row_sums()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > T::zero())
            .map(|(i, _)| i)
            .collect();
        if keep.is_empty() {
            return Err(PmlError::contract(
                "filter_empty_truth",
                "every sample has an empty ground-truth row",
            ));
        }
        self.select(&keep)
    }

    /// Ground truth when present, otherwise the candidate matrix.
    pub fn evaluation_targets(&self) -> &DenseMatrix<T> {
        self.truth.as_ref().unwrap_or(&self.candidates)
    }
}

fn format_err(path: &str, line: usize, msg: impl Into<String>) -> PmlError {
    PmlError::Format {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parse matrix text. `origin` names the source in error messages.
pub fn parse_matrix<T: Scalar>(
    text: &str,
    kind: MatrixKind,
    origin: &str,
) -> Result<DenseMatrix<T>> {
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().unwrap_or("");
    let dims: Vec<&str> = header.split(' ').collect();
    let parse_dim = |s: &str| -> Option<usize> {
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            s.parse().ok()
        } else {
            None
        }
    };
    let (rows, cols) = match dims.as_slice() {
        [r, c] => match (parse_dim(r), parse_dim(c)) {
            (Some(r), Some(c)) if r > 0 && c > 0 => (r, c),
            _ => return Err(format_err(origin, 1, format!("bad header {header:?}"))),
        },
        _ => {
            return Err(format_err(
                origin,
                1,
                format!("header must be \"<rows> <cols>\", got {header:?}"),
            ))
        }
    };

    let body: Vec<(usize, &str)> = lines.enumerate().map(|(i, l)| (i + 2, l)).collect();
    // Only trailing blank lines may be dropped.
    let last = body
        .iter()
        .rposition(|(_, l)| !l.trim().is_empty())
        .map_or(0, |p| p + 1);
    let body = &body[..last];
    if body.len() != rows {
        return Err(format_err(
            origin,
            body.last().map_or(1, |(n, _)| *n),
            format!("header declares {rows} rows, body has {}", body.len()),
        ));
    }

    let mut data = Vec::with_capacity(rows * cols);
    for &(lineno, line) in body {
        let mut count = 0;
        for tok in line.split_whitespace() {
            count += 1;
            let v = match kind {
                MatrixKind::Labels => match tok {
                    "0" => T::zero(),
                    "1" => T::one(),
                    _ => {
                        return Err(format_err(
                            origin,
                            lineno,
                            format!("label entry {tok:?} is not 0 or 1"),
                        ))
                    }
                },
                MatrixKind::Features => {
                    let v: T = tok.parse().map_err(|_| {
                        format_err(origin, lineno, format!("non-numeric token {tok:?}"))
                    })?;
                    if !v.is_finite() {
                        return Err(format_err(
                            origin,
                            lineno,
                            format!("non-finite value {tok:?}"),
                        ));
                    }
                    v
                }
            };
            data.push(v);
        }
        if count != cols {
            return Err(format_err(
                origin,
                lineno,
                format!("expected {cols} entries, found {count}"),
            ));
        }
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn load_matrix<T: Scalar>(path: &Path, kind: MatrixKind) -> Result<DenseMatrix<T>> {
    let text = fs::read_to_string(path).map_err(|e| PmlError::io(path, e))?;
    parse_matrix(&text, kind, &path.display().to_string())
}

/// Render in the matrix text format. Values use the shortest representation
/// that parses back to the same number, so loading is an exact inverse.
pub fn format_matrix<T: Scalar>(m: &DenseMatrix<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            // -0 would not pass the label grammar.
            let v = if *v == T::zero() { T::zero() } else { *v };
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix<T: Scalar>(path: &Path, m: &DenseMatrix<T>) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| PmlError::io(path, e))
}

/// Number of spurious labels added to each sample, and the RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub r: usize,
    pub seed: u64,
}

/// Add `min(r, #negatives)` spurious labels per row, chosen uniformly without
/// replacement.
///
/// Rows are processed in order from one ChaCha8 stream seeded by `spec.seed`.
/// For each row the zero positions are listed in ascending column order and a
/// partial Fisher–Yates shuffle picks the first `k` of them: for `t in 0..k`,
/// draw `j` uniformly in `t..len` and swap positions `t` and `j`.
pub fn inject_noise<T: Scalar>(truth: &DenseMatrix<T>, spec: NoiseSpec) -> Result<DenseMatrix<T>> {
    if !truth.is_binary() {
        return Err(PmlError::contract("inject_noise", "truth must be binary"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = truth.clone();
    for i in 0..truth.rows() {
        let mut zeros: Vec<usize> = truth
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == T::zero())
            .map(|(j, _)| j)
            .collect();
        let k = spec.r.min(zeros.len());
        for t in 0..k {
            let j = rng.random_range(t..zeros.len());
            zeros.swap(t, j);
            out[(i, zeros[t])] = T::one();
        }
    }
    Ok(out)
}

/// Per-sample fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldSplit {
    /// `(train, test)` sample indices for one fold, both ascending.
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded k-fold split: samples are permuted by a full Fisher–Yates shuffle and
/// the sample at permuted position `p` goes to fold `p mod k`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(PmlError::contract("kfold_split", format!("k = {k} < 2")));
    }
    if n < k {
        return Err(PmlError::contract(
            "kfold_split",
            format!("n = {n} < k = {k}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for t in (1..n).rev() {
        let j = rng.random_range(0..=t);
        perm.swap(t, j);
    }
    let mut assignments = vec![0; n];
    for (p, &i) in perm.iter().enumerate() {
        assignments[i] = p % k;
    }
    Ok(FoldSplit { k, assignments })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub avg_candidate_labels: f64,
    pub avg_true_labels: Option<f64>,
}

pub fn describe<T: Scalar>(ds: &Dataset<T>) -> DatasetSummary {
    let mean_row_sum = |m: &DenseMatrix<T>| m.sum().as_f64() / m.rows() as f64;
    DatasetSummary {
        n: ds.n_samples(),
        d: ds.n_features(),
        l: ds.n_labels(),
        avg_candidate_labels: mean_row_sum(&ds.candidates),
        avg_true_labels: ds.truth.as_ref().map(mean_row_sum),
    }
}

/// Column-wise zero mean, unit population variance. Constant columns become zero.
pub fn standardize<T: Scalar>(x: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (n, d) = x.shape();
    let nf = T::from_count(n);
    let mut means = vec![T::zero(); d];
    for i in 0..n {
        for (m, &v) in means.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= nf);
    let mut vars = vec![T::zero(); d];
    for i in 0..n {
        for ((s, &v), &m) in vars.iter_mut().zip(x.row(i)).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds: Vec<T> = vars.iter().map(|&s| (s / nf).sqrt()).collect();
    DenseMatrix::from_fn(n, d, |i, j| {
        let centered = x[(i, j)] - means[j];
        // Treat columns whose spread is rounding noise as constant.
        if stds[j] <= T::epsilon() * (T::one() + means[j].abs()) * T::lit(16.0) {
            T::zero()
        } else {
            centered / stds[j]
        }
    })
}

/// Shape and seed of a generated benchmark instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// Spurious labels added per sample.
    pub r: usize,
    /// Standard deviation of the latent noise added before thresholding.
    pub latent_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, l: usize, r: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            l,
            r,
            latent_noise: 0.1,
            seed,
        }
    }
}

/// Linearly generated multi-label data with full-rank ground truth.
///
/// Features: a leading constant column of ones followed by `d - 1` standard
/// normal columns. Ground truth: `1[x·w_j + noise > 0.5]` for standard normal
/// weights scaled by `1/sqrt(d)`. Candidates: ground truth plus `r` injected
/// spurious labels per row. Instances whose ground truth is rank deficient are
/// regenerated from the next seed in sequence.
pub fn synthetic_dataset<T: Scalar>(spec: SyntheticSpec) -> Result<Dataset<T>> {
    if spec.d < 2 || spec.n < 1 || spec.l < 1 {
        return Err(PmlError::contract(
            "synthetic_dataset",
            "need d >= 2, n >= 1, l >= 1",
        ));
    }
    let full = spec.n.min(spec.l);
    for attempt in 0..64u64 {
        let seed = spec
            .seed
            .wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let x =
            DenseMatrix::<f64>::from_fn(spec.n, spec.d, |_, j| if j == 0 { 1.0 } else { normal() });
        let scale = 1.0 / (spec.d as f64).sqrt();
        let w = DenseMatrix::<f64>::from_fn(spec.d, spec.l, |_, _| normal() * scale);
        let latent = x.matmul(&w)?;
        let truth = latent.map(|z| {
            let noisy = z + spec.latent_noise * normal();
            if noisy > 0.5 {
                1.0
            } else {
                0.0
            }
        });
        if numerics::numerical_rank(&truth)? < full {
            continue;
        }
        let candidates = inject_noise(&truth, NoiseSpec { r: spec.r, seed })?;
        return Dataset::new(x.cast(), candidates.cast(), Some(truth.cast()));
    }
    Err(PmlError::numerical(
        "synthetic_dataset",
        "could not draw a full-rank ground truth",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn parses_binary_file() {
        let m: M = parse_matrix("2 3\n1 0 1\n0 1 0\n", MatrixKind::Labels, "t").unwrap();
        assert_eq!(m, M::from_f64_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]));
        let crlf: M = parse_matrix("2 3\r\n1 0 1\r\n0 1 0", MatrixKind::Labels, "t").unwrap();
        assert_eq!(crlf, m);
    }

    #[test]
    fn label_grammar_is_strict() {
        let err = parse_matrix::<f64>("1 1\n0.5\n", MatrixKind::Labels, "t").unwrap_err();
        assert!(matches!(err, PmlError::Format { line: 2, .. }), "{err}");
        assert!(parse_matrix::<f64>("1 1\n1.0\n", MatrixKind::Labels, "t").is_err());
        let ok: M = parse_matrix("1 2\n0.5 -1e-3\n", MatrixKind::Features, "t").unwrap();
        assert_eq!(ok.as_slice(), &[0.5, -1e-3]);
    }

    #[test]
    fn row_count_mismatch() {
        let err = parse_matrix::<f64>("2 2\n1 0\n", MatrixKind::Labels, "t").unwrap_err();
        assert!(err.to_string().contains("2 rows"), "{err}");
        assert!(parse_matrix::<f64>("1 2\n1 0 1\n", MatrixKind::Labels, "t").is_err());
        assert!(parse_matrix::<f64>("1 2\n1 x\n", MatrixKind::Features, "t").is_err());
        assert!(parse_matrix::<f64>("1  2\n1 0\n", MatrixKind::Labels, "t").is_err());
        assert!(parse_matrix::<f64>("1 1\nNaN\n", MatrixKind::Features, "t").is_err());
    }

    #[test]
    fn missing_file_is_not_found() {
        let err =
            load_matrix::<f64>(Path::new("/nonexistent/x.txt"), MatrixKind::Features).unwrap_err();
        assert!(matches!(err, PmlError::NotFound(_)));
    }

    #[test]
    fn noise_saturates() {
        let full = M::from_f64_rows(&[&[1.0, 1.0, 1.0]]);
        assert_eq!(
            inject_noise(&full, NoiseSpec { r: 2, seed: 1 }).unwrap(),
            full
        );
        let one = M::from_f64_rows(&[&[1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(
            inject_noise(&one, NoiseSpec { r: 4, seed: 1 }).unwrap(),
            M::ones(1, 4)
        );
    }

    #[test]
    fn noise_is_seeded() {
        let truth = M::from_f64_rows(&[
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 1.0, 0.0],
        ]);
        let spec = NoiseSpec { r: 1, seed: 42 };
        let a = inject_noise(&truth, spec).unwrap();
        let b = inject_noise(&truth, spec).unwrap();
        assert_eq!(a, b);
        let added = a.sub(&truth).unwrap();
        assert!(added.is_binary());
        assert_eq!(added.row_sums(), vec![1.0, 1.0, 1.0]);
        assert!(inject_noise(&M::from_f64_rows(&[&[0.5]]), spec).is_err());
    }

    #[test]
    fn folds_balanced_and_seeded() {
        let s = kfold_split(10, 5, 3).unwrap();
        assert_eq!(s.fold_sizes(), vec![2; 5]);
        assert_eq!(s, kfold_split(10, 5, 3).unwrap());
        let mut sizes = kfold_split(11, 5, 3).unwrap().fold_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        assert!(kfold_split(4, 5, 0).is_err());
        assert!(kfold_split(4, 1, 0).is_err());
    }

    #[test]
    fn describe_averages() {
        let ds = Dataset::new(
            M::ones(2, 1),
            M::from_f64_rows(&[&[1.0, 1.0], &[1.0, 0.0]]),
            None,
        )
        .unwrap();
        let s = describe(&ds);
        assert_eq!(s.avg_candidate_labels, 1.5);
        assert_eq!(s.avg_true_labels, None);
    }

    #[test]
    fn dataset_rejects_truth_outside_candidates() {
        let y = M::from_f64_rows(&[&[1.0, 0.0]]);
        let t = M::from_f64_rows(&[&[0.0, 1.0]]);
        assert!(Dataset::new(M::ones(1, 1), y, Some(t)).is_err());
    }

    #[test]
    fn filter_empty_truth_drops_rows() {
        let y = M::from_f64_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let t = M::from_f64_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let x = M::from_f64_rows(&[&[1.0], &[2.0], &[3.0]]);
        let ds = Dataset::new(x, y, Some(t))
            .unwrap()
            .filter_empty_truth()
            .unwrap();
        assert_eq!(ds.features.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn standardize_examples() {
        let x = M::from_f64_rows(&[&[1.0, 5.0], &[3.0, 5.0]]);
        let z = standardize(&x);
        assert_eq!(z, M::from_f64_rows(&[&[-1.0, 0.0], &[1.0, 0.0]]));
    }

    #[test]
    fn synthetic_truth_full_rank() {
        let ds: Dataset<f64> = synthetic_dataset(SyntheticSpec::new(60, 10, 8, 2, 7)).unwrap();
        let t = ds.truth.as_ref().unwrap();
        assert_eq!(numerics::numerical_rank(t).unwrap(), 8);
        assert!(ds.features.column(0).iter().all(|&v| v == 1.0));
        ds.validate().unwrap();
    }
}
