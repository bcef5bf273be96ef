//! Subcommand definitions and their implementations.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pml_core::data::{
    format_matrix, inject_noise, load_matrix, save_matrix, MatrixKind, NoiseSpec,
};
use pml_core::diagnostics::{rank_report, verify_rank_theorem};
use pml_core::metrics::evaluate_all;
use pml_core::solver::{binarize, fit, FitReport};
use pml_core::{Model, PmlError, Result};

use crate::config::ExperimentConfig;
use crate::experiment::{
    ablate, cross_validate, grid_search, load_dataset, provenance, with_jobs, AblationResult,
    CvResult, GridRow,
};
use crate::output::{ablation_csv, cv_csv, grid_csv, json, metrics_csv, Artifact};

#[derive(Debug, Parser)]
#[command(
    name = "schirn",
    version,
    about = "Partial multi-label learning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add r spurious labels per row to a label matrix.
    Inject(InjectArgs),
    /// Fit a model on the whole dataset; writes W.txt, model.meta, fit_report.json.
    Fit(ExperimentArgs),
    /// Score a feature matrix with a saved model.
    Predict(PredictArgs),
    /// Evaluate scores against ground truth.
    Eval(EvalArgs),
    /// k-fold cross-validation; writes cv.csv and cv.json.
    Cv(ExperimentArgs),
    /// Cross-validated search over alpha, beta, lambda; writes grid.csv and grid.json.
    Grid(ExperimentArgs),
    /// Cross-validate all four model variants; writes ablation.csv and ablation.json.
    Ablate(ExperimentArgs),
    /// Ranks of predictions, candidates and truth for a saved model.
    RankReport(RankReportArgs),
    /// Monte-Carlo check of rank(Y - N) >= min(n, l) - rank(N).
    TheoremCheck(TheoremArgs),
}

/// Every flag here doubles as a config-file key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// key=value file; flags given here override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<String>,
    /// Candidate labels (or clean labels when --r > 0).
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long)]
    pub truth: Option<String>,
    /// Spurious labels injected per sample before the run.
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub folds: Option<String>,
    #[arg(long)]
    pub jobs: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub filter_empty_truth: Option<String>,
    /// Number, or comma list for grid.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// high-rank, no-rank, no-sparsity or low-rank.
    #[arg(long)]
    pub variant: Option<String>,
    /// paper or derived.
    #[arg(long)]
    pub c_shift: Option<String>,
    #[arg(long)]
    pub mu0: Option<String>,
    #[arg(long)]
    pub mu_max: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub threshold: Option<String>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let fields = [
            ("features", &self.features),
            ("labels", &self.labels),
            ("truth", &self.truth),
            ("r", &self.r),
            ("seed", &self.seed),
            ("folds", &self.folds),
            ("jobs", &self.jobs),
            ("out", &self.out),
            ("standardize", &self.standardize),
            ("filter-empty-truth", &self.filter_empty_truth),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("lambda", &self.lambda),
            ("variant", &self.variant),
            ("c-shift", &self.c_shift),
            ("mu0", &self.mu0),
            ("mu-max", &self.mu_max),
            ("rho", &self.rho),
            ("max-iter", &self.max_iter),
            ("tol", &self.tol),
            ("threshold", &self.threshold),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    /// Clean label matrix.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file for the candidate labels.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory for scores.txt and predictions.txt; scores go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Binary predictions; derived from the scores when absent.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub epsilon: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Write artifacts into `out`, or print the first one to stdout.
fn emit(out: Option<&Path>, artifacts: &[Artifact]) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| PmlError::io(dir, e))?;
            for a in artifacts {
                let path = dir.join(&a.file);
                fs::write(&path, &a.contents).map_err(|e| PmlError::io(&path, e))?;
            }
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&artifacts[0].contents)
                .map_err(|e| PmlError::io("<stdout>", e))
        }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: std::collections::BTreeMap<String, String>,
    #[serde(flatten)]
    body: &'a T,
}

pub fn cmd_inject(args: &InjectArgs) -> Result<()> {
    let truth = load_matrix::<f64>(&args.labels, MatrixKind::Labels)?;
    let noisy = inject_noise(
        &truth,
        NoiseSpec {
            r: args.r,
            seed: args.seed,
        },
    )?;
    save_matrix(&args.out, &noisy)
}

pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<Model> {
    cfg.require_single_setting()?;
    let out = cfg
        .out
        .as_deref()
        .ok_or_else(|| PmlError::Config("fit needs --out".into()))?;
    let ds = load_dataset(cfg)?;
    let model = fit(&ds, &cfg.params)?;
    model.save(out)?;
    #[derive(Serialize)]
    struct FitBody<'a> {
        report: &'a FitReport,
    }
    let report = json(
        "fit_report.json",
        &Report {
            config: provenance(cfg),
            body: &FitBody {
                report: &model.report,
            },
        },
    )?;
    emit(Some(out), &[report])?;
    Ok(model)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let x = load_matrix(&args.features, MatrixKind::Features)?;
    let scores = model.predict_scores(&x)?;
    let labels = binarize(&scores, model.params.threshold);
    emit(
        args.out.as_deref(),
        &[
            Artifact::new("scores.txt", format_matrix(&scores)),
            Artifact::new("predictions.txt", format_matrix(&labels)),
        ],
    )
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let scores = load_matrix::<f64>(&args.scores, MatrixKind::Features)?;
    let truth = load_matrix(&args.truth, MatrixKind::Labels)?;
    let pred = match &args.predictions {
        Some(p) => load_matrix(p, MatrixKind::Labels)?,
        None => binarize(&scores, args.threshold),
    };
    let report = evaluate_all(&scores, &pred, &truth)?;
    emit(
        args.out.as_deref(),
        &[
            json("eval.json", &report)?,
            metrics_csv("eval.csv", &report, args.threshold)?,
        ],
    )
}

pub fn cmd_cv(cfg: &ExperimentConfig) -> Result<CvResult> {
    cfg.require_single_setting()?;
    let ds = load_dataset(cfg)?;
    let result = with_jobs(cfg.jobs, || {
        cross_validate(&ds, &cfg.params, cfg.folds, cfg.seed)
    })??;
    emit(
        cfg.out.as_deref(),
        &[
            cv_csv("cv.csv", &result, &cfg.params)?,
            json(
                "cv.json",
                &Report {
                    config: provenance(cfg),
                    body: &result,
                },
            )?,
        ],
    )?;
    Ok(result)
}

pub fn cmd_grid(cfg: &ExperimentConfig) -> Result<Vec<GridRow>> {
    let ds = load_dataset(cfg)?;
    let rows = with_jobs(cfg.jobs, || grid_search(&ds, cfg))??;
    #[derive(Serialize)]
    struct GridBody<'a> {
        rows: &'a [GridRow],
    }
    emit(
        cfg.out.as_deref(),
        &[
            grid_csv("grid.csv", &rows, &cfg.params)?,
            json(
                "grid.json",
                &Report {
                    config: provenance(cfg),
                    body: &GridBody { rows: &rows },
                },
            )?,
        ],
    )?;
    Ok(rows)
}

pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<AblationResult> {
    cfg.require_single_setting()?;
    let ds = load_dataset(cfg)?;
    let result = with_jobs(cfg.jobs, || ablate(&ds, cfg))??;
    emit(
        cfg.out.as_deref(),
        &[
            ablation_csv("ablation.csv", &result, &cfg.params)?,
            json(
                "ablation.json",
                &Report {
                    config: provenance(cfg),
                    body: &result,
                },
            )?,
        ],
    )?;
    Ok(result)
}

pub fn cmd_rank_report(args: &RankReportArgs) -> Result<()> {
    let cfg = args.data.resolve()?;
    let model = Model::load(&args.model)?;
    let ds = load_dataset(&cfg)?;
    let report = rank_report(&model, &ds)?;
    emit(cfg.out.as_deref(), &[json("rank_report.json", &report)?])
}

pub fn cmd_theorem_check(args: &TheoremArgs) -> Result<()> {
    let result = verify_rank_theorem(args.n, args.l, args.epsilon, args.trials, args.seed)?;
    emit(args.out.as_deref(), &[json("theorem_check.json", &result)?])
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Inject(a) => cmd_inject(a),
        Command::Fit(a) => cmd_fit(&a.resolve()?).map(drop),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Cv(a) => cmd_cv(&a.resolve()?).map(drop),
        Command::Grid(a) => cmd_grid(&a.resolve()?).map(drop),
        Command::Ablate(a) => cmd_ablate(&a.resolve()?).map(drop),
        Command::RankReport(a) => cmd_rank_report(a),
        Command::TheoremCheck(a) => cmd_theorem_check(a),
    }
}

pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

pub fn exit_code(err: &PmlError) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parse, run and map the outcome to a process exit code. Errors go to stderr.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
