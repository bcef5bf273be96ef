//! Cross-validation, grid search and ablation over the solver.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use pml_core::data::{inject_noise, kfold_split, load_matrix, standardize, MatrixKind, NoiseSpec};
use pml_core::diagnostics::{paired_ttest, Verdict};
use pml_core::metrics::{evaluate_all, MetricReport};
use pml_core::solver::{binarize, fit, SchirnParams, Variant};
use pml_core::{Dataset, PmlError, Result};

use crate::config::ExperimentConfig;

/// Features, candidates and (optional) truth as the config describes them.
///
/// With `r > 0` the label file is taken as clean: `r` spurious labels per row
/// are injected to form the candidates, and it doubles as the truth when no
/// truth file is given. Rows with empty truth are dropped before features
/// are standardized.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let x = load_matrix(cfg.features_path()?, MatrixKind::Features)?;
    let labels = load_matrix(cfg.labels_path()?, MatrixKind::Labels)?;
    let truth = cfg
        .truth
        .as_deref()
        .map(|p| load_matrix(p, MatrixKind::Labels))
        .transpose()?;
    let (candidates, truth) = if cfg.r > 0 {
        let noisy = inject_noise(
            &labels,
            NoiseSpec {
                r: cfg.r,
                seed: cfg.seed,
            },
        )?;
        (noisy, Some(truth.unwrap_or(labels)))
    } else {
        (labels, truth)
    };
    let mut ds = Dataset::new(x, candidates, truth)?;
    if cfg.filter_empty_truth {
        ds = ds.filter_empty_truth()?;
    }
    if cfg.standardize {
        ds.features = standardize(&ds.features);
    }
    Ok(ds)
}

/// Runs `f` on a pool of `jobs` threads.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PmlError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// The five metrics in [`MetricReport::NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValues {
    pub average_precision: f64,
    pub ranking_loss: f64,
    pub coverage: f64,
    pub hamming_loss: f64,
    pub one_error: f64,
}

impl MetricValues {
    fn from_array(v: [f64; 5]) -> Self {
        MetricValues {
            average_precision: v[0],
            ranking_loss: v[1],
            coverage: v[2],
            hamming_loss: v[3],
            one_error: v[4],
        }
    }

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

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub folds: Vec<MetricReport>,
    pub mean: MetricValues,
    /// Sample standard deviation across folds.
    pub std: MetricValues,
}

impl CvResult {
    fn from_folds(folds: Vec<MetricReport>) -> Self {
        let k = folds.len() as f64;
        let mut mean = [0.0; 5];
        for f in &folds {
            for (m, v) in mean.iter_mut().zip(f.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= k);
        let mut var = [0.0; 5];
        for f in &folds {
            for ((s, v), m) in var.iter_mut().zip(f.values()).zip(mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.map(|s| (s / (k - 1.0)).sqrt());
        CvResult {
            folds,
            mean: MetricValues::from_array(mean),
            std: MetricValues::from_array(std),
        }
    }

    pub fn fold_values(&self, metric: usize) -> Vec<f64> {
        self.folds.iter().map(|f| f.values()[metric]).collect()
    }
}

/// Fit on the training rows of one fold and evaluate on its held-out rows.
pub fn evaluate_fold(
    ds: &Dataset,
    train: &[usize],
    test: &[usize],
    params: &SchirnParams<f64>,
) -> Result<MetricReport> {
    let train = ds.select(train)?;
    let test = ds.select(test)?;
    let model = fit(&train, params)?;
    let scores = model.predict_scores(&test.features)?;
    let pred = binarize(&scores, params.threshold);
    evaluate_all(&scores, &pred, test.evaluation_targets())
}

/// k-fold cross-validation; folds run on the current rayon pool and are
/// reported in fold order.
pub fn cross_validate(
    ds: &Dataset,
    params: &SchirnParams<f64>,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let split = kfold_split(ds.n_samples(), folds, seed)?;
    let reports = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split.train_test(f);
            evaluate_fold(ds, &train, &test, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult::from_folds(reports))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub best: bool,
    pub cv: CvResult,
}

/// Cross-validates every (α, β, λ) combination, then sorts by mean average
/// precision, best first. Equal scores keep enumeration order.
pub fn grid_search(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<GridRow>> {
    let combos = cfg.grid.combinations();
    let mut rows = combos
        .par_iter()
        .map(|&(alpha, beta, lambda)| {
            let params = SchirnParams {
                alpha,
                beta,
                lambda,
                ..cfg.params
            };
            params.validate()?;
            Ok(GridRow {
                alpha,
                beta,
                lambda,
                best: false,
                cv: cross_validate(ds, &params, cfg.folds, cfg.seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        b.cv.mean
            .average_precision
            .total_cmp(&a.cv.mean.average_precision)
    });
    if let Some(first) = rows.first_mut() {
        first.best = true;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub cv: CvResult,
}

/// Paired t-test of the full method against another variant on per-fold
/// average precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantComparison {
    pub versus: Variant,
    pub mean_difference: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub high_rank_vs: Vec<VariantComparison>,
}

pub const TTEST_LEVEL: f64 = 0.05;

/// One cross-validation per variant with identical folds and settings.
pub fn ablate(ds: &Dataset, cfg: &ExperimentConfig) -> Result<AblationResult> {
    let rows = Variant::ALL
        .par_iter()
        .map(|&variant| {
            let params = SchirnParams {
                variant,
                ..cfg.params
            };
            Ok(AblationRow {
                variant,
                cv: cross_validate(ds, &params, cfg.folds, cfg.seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let base = rows[0].cv.fold_values(0);
    let high_rank_vs = rows[1..]
        .iter()
        .map(|row| {
            let t = paired_ttest(&base, &row.cv.fold_values(0), TTEST_LEVEL)?;
            Ok(VariantComparison {
                versus: row.variant,
                mean_difference: t.mean_difference,
                t_stat: t.t_stat,
                p_value: t.p_value,
                verdict: t.verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationResult { rows, high_rank_vs })
}

/// Settings that determine a run's output, for embedding in reports.
pub fn provenance(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = cfg
        .params
        .to_pairs()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    for (k, v) in [
        ("features", &cfg.features),
        ("labels", &cfg.labels),
        ("truth", &cfg.truth),
    ] {
        if let Some(p) = v {
            out.insert(k.into(), p.display().to_string());
        }
    }
    out.insert("r".into(), cfg.r.to_string());
    out.insert("seed".into(), cfg.seed.to_string());
    out.insert("folds".into(), cfg.folds.to_string());
    out.insert("standardize".into(), cfg.standardize.to_string());
    out.insert(
        "filter-empty-truth".into(),
        cfg.filter_empty_truth.to_string(),
    );
    out
}
