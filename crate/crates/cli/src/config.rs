//! Experiment configuration.
//!
//! A config file is flat `key=value` text: one pair per line, `#` starts a
//! comment line, blank lines are ignored, surrounding whitespace is trimmed
//! and a repeated key keeps its last value. Keys are the long flag names
//! without the leading dashes, and a flag given on the command line replaces
//! the file's value for the same key.
//!
//! | key | value |
//! |-----|-------|
//! | `features`, `labels`, `truth` | paths to matrix text files |
//! | `r` | spurious labels injected per sample before the run (0 = none) |
//! | `seed` | 64-bit seed for noise injection and fold assignment |
//! | `folds` | cross-validation folds (default 5) |
//! | `jobs` | worker threads for folds and grid cells (default 1) |
//! | `out` | output directory |
//! | `standardize`, `filter-empty-truth` | `true` / `false` |
//! | `alpha`, `beta`, `lambda` | a number, or a comma list for `grid` |
//! | `mu0`, `mu-max`, `rho`, `max-iter`, `tol`, `threshold` | solver settings |
//! | `variant` | `high-rank`, `no-rank`, `no-sparsity`, `low-rank` |
//! | `c-shift` | `paper` or `derived` |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pml_core::solver::{parse_key_values, SchirnParams};
use pml_core::{PmlError, Result};

pub const DEFAULT_FOLDS: usize = 5;

const SOLVER_KEYS: [&str; 8] = [
    "mu0",
    "mu-max",
    "rho",
    "max-iter",
    "tol",
    "variant",
    "threshold",
    "c-shift",
];
const OWN_KEYS: [&str; 13] = [
    "features",
    "labels",
    "truth",
    "r",
    "seed",
    "folds",
    "jobs",
    "out",
    "standardize",
    "filter-empty-truth",
    "alpha",
    "beta",
    "lambda",
];

/// Candidate values for each tuned weight; `None` means the default list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridSpec {
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn default_alpha() -> Vec<f64> {
        (1..=20).map(|i| i as f64 / 10.0).collect()
    }

    pub fn default_beta() -> Vec<f64> {
        (1..=10).map(|j| j as f64 / 100.0).collect()
    }

    pub fn default_lambda() -> Vec<f64> {
        vec![0.1, 10.0, 100.0, 250.0, 1000.0]
    }

    /// Cartesian product in (α, β, λ) lexicographic order.
    pub fn combinations(&self) -> Vec<(f64, f64, f64)> {
        let alpha = self.alpha.clone().unwrap_or_else(Self::default_alpha);
        let beta = self.beta.clone().unwrap_or_else(Self::default_beta);
        let lambda = self.lambda.clone().unwrap_or_else(Self::default_lambda);
        let mut out = Vec::with_capacity(alpha.len() * beta.len() * lambda.len());
        for &a in &alpha {
            for &b in &beta {
                for &l in &lambda {
                    out.push((a, b, l));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub r: usize,
    pub seed: u64,
    pub params: SchirnParams<f64>,
    pub folds: usize,
    pub grid: GridSpec,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub standardize: bool,
    pub filter_empty_truth: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            features: None,
            labels: None,
            truth: None,
            r: 0,
            seed: 0,
            params: SchirnParams::default(),
            folds: DEFAULT_FOLDS,
            grid: GridSpec::default(),
            jobs: 1,
            out: None,
            standardize: false,
            filter_empty_truth: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| PmlError::Config(format!("invalid value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(PmlError::Config(format!("invalid boolean {v:?} for {key}"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let items: Vec<f64> = v
        .split(',')
        .map(|s| parse_num::<f64>(key, s.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(PmlError::Config(format!("{key} list is empty")));
    }
    Ok(items)
}

impl ExperimentConfig {
    /// Config file pairs, overridden by command-line pairs.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| PmlError::io(path, e))?;
                parse_key_values(&text, &path.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            pairs.insert(k.clone(), v.clone());
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut solver = Vec::new();
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "features" => cfg.features = Some(PathBuf::from(v)),
                "labels" => cfg.labels = Some(PathBuf::from(v)),
                "truth" => cfg.truth = Some(PathBuf::from(v)),
                "out" => cfg.out = Some(PathBuf::from(v)),
                "r" => cfg.r = parse_num(k, v)?,
                "seed" => cfg.seed = parse_num(k, v)?,
                "folds" => cfg.folds = parse_num(k, v)?,
                "jobs" => cfg.jobs = parse_num(k, v)?,
                "standardize" => cfg.standardize = parse_bool(k, v)?,
                "filter-empty-truth" => cfg.filter_empty_truth = parse_bool(k, v)?,
                "alpha" => cfg.grid.alpha = Some(parse_list(k, v)?),
                "beta" => cfg.grid.beta = Some(parse_list(k, v)?),
                "lambda" => cfg.grid.lambda = Some(parse_list(k, v)?),
                key if SOLVER_KEYS.contains(&key) => solver.push((key, v)),
                other => {
                    return Err(PmlError::Config(format!(
                        "unknown config key {other:?} (known: {}, {})",
                        OWN_KEYS.join(", "),
                        SOLVER_KEYS.join(", ")
                    )))
                }
            }
        }
        cfg.params.apply_pairs(solver)?;
        // The first listed value is the single-run setting.
        if let Some(a) = &cfg.grid.alpha {
            cfg.params.alpha = a[0];
        }
        if let Some(b) = &cfg.grid.beta {
            cfg.params.beta = b[0];
        }
        if let Some(l) = &cfg.grid.lambda {
            cfg.params.lambda = l[0];
        }
        cfg.params.validate()?;
        if cfg.folds < 2 {
            return Err(PmlError::Config(format!(
                "folds must be >= 2, got {}",
                cfg.folds
            )));
        }
        if cfg.jobs == 0 {
            return Err(PmlError::Config("jobs must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Rejects α/β/λ lists for commands that take a single setting.
    pub fn require_single_setting(&self) -> Result<()> {
        for (key, list) in [
            ("alpha", &self.grid.alpha),
            ("beta", &self.grid.beta),
            ("lambda", &self.grid.lambda),
        ] {
            if list.as_ref().is_some_and(|l| l.len() > 1) {
                return Err(PmlError::Config(format!(
                    "{key} takes a single value here; lists are for grid"
                )));
            }
        }
        Ok(())
    }

    pub fn features_path(&self) -> Result<&Path> {
        self.features
            .as_deref()
            .ok_or_else(|| PmlError::Config("missing features path".into()))
    }

    pub fn labels_path(&self) -> Result<&Path> {
        self.labels
            .as_deref()
            .ok_or_else(|| PmlError::Config("missing labels path".into()))
    }
}
