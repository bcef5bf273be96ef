#![allow(dead_code)]

use pml_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn binary(rng: &mut ChaCha8Rng, rows: usize, cols: usize, p: f64) -> Matrix {
    Matrix::from_fn(
        rows,
        cols,
        |_, _| if rng.random::<f64>() < p { 1.0 } else { 0.0 },
    )
}

/// `MᵀM + I` for a Gaussian `M`.
pub fn spd(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let m = gaussian(rng, d + 2, d);
    m.gram().add(&Matrix::identity(d)).unwrap()
}
