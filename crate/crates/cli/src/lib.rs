//! Experiment harness for the Schirn partial multi-label solver: config
//! handling, cross-validation, grid search, ablation and the `schirn` CLI.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

pub use commands::{main_with_args, Cli};
pub use config::{ExperimentConfig, GridSpec};
