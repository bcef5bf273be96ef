//! Partial multi-label learning that treats the noise in candidate label sets
//! as a sparse binary matrix while keeping the predicted label matrix high-rank.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix the element type to `f64`, which is what the experiment
//! harness and the tolerances in the test suite assume.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod scalar;
pub mod solver;

pub use error::{PmlError, Result};
pub use numerics::{DenseMatrix, EigResult, Norms, SvdResult};
pub use scalar::Scalar;

pub type Matrix = DenseMatrix<f64>;
pub type Matrix32 = DenseMatrix<f32>;
pub type Dataset = data::Dataset<f64>;
pub type SchirnParams = solver::SchirnParams<f64>;
pub type Model = solver::Model<f64>;
pub use solver::FitReport;
