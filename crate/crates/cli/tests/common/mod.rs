#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pml_cli::ExperimentConfig;
use pml_core::data::{save_matrix, synthetic_dataset, SyntheticSpec};
use pml_core::Dataset;

pub struct Files {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub truth: PathBuf,
}

/// Writes a synthetic instance as `features.txt`, `labels.txt` (candidates)
/// and `truth.txt` under `dir`.
pub fn write_synthetic(dir: &Path, spec: SyntheticSpec) -> (Dataset, Files) {
    let ds: Dataset = synthetic_dataset(spec).unwrap();
    let files = Files {
        features: dir.join("features.txt"),
        labels: dir.join("labels.txt"),
        truth: dir.join("truth.txt"),
    };
    save_matrix(&files.features, &ds.features).unwrap();
    save_matrix(&files.labels, &ds.candidates).unwrap();
    save_matrix(&files.truth, ds.truth.as_ref().unwrap()).unwrap();
    (ds, files)
}

pub fn config(files: &Files, out: Option<&Path>) -> ExperimentConfig {
    ExperimentConfig {
        features: Some(files.features.clone()),
        labels: Some(files.labels.clone()),
        truth: Some(files.truth.clone()),
        out: out.map(Path::to_path_buf),
        ..ExperimentConfig::default()
    }
}

pub fn schirn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schirn"))
        .args(args)
        .output()
        .expect("spawn schirn")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
