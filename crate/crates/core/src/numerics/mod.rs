//! Dense linear algebra kernels and scalar operators.
//!
//! Every kernel rejects non-finite input at entry.

mod eig;
mod matrix;
mod svd;

pub use eig::{sym_eig, EigResult};
pub use matrix::DenseMatrix;
pub use svd::{svd, SvdResult};

use crate::error::{PmlError, Result};
use crate::scalar::Scalar;

/// Soft-thresholding: moves `a` toward zero by `eps`, clamping the band `[-eps, eps]` to 0.
#[inline]
pub fn shrink<T: Scalar>(a: T, eps: T) -> T {
    debug_assert!(eps >= T::zero());
    if a > eps {
        a - eps
    } else if a < -eps {
        a + eps
    } else {
        T::zero()
    }
}

/// Solve `A X = B` for symmetric positive definite `A` via Cholesky.
pub fn solve_spd<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    a.ensure_finite("solve_spd")?;
    b.ensure_finite("solve_spd")?;
    eig::check_symmetric(a, "solve_spd")?;
    let d = a.rows();
    if b.rows() != d {
        return Err(PmlError::dim(
            "solve_spd",
            format!("A is {d}x{d}, B has {} rows", b.rows()),
        ));
    }

    // Lower-triangular factor L with A = L Lᵀ.
    let mut l = DenseMatrix::<T>::zeros(d, d);
    for j in 0..d {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= T::zero() || !diag.is_finite() {
            return Err(PmlError::numerical(
                "solve_spd",
                format!("matrix not positive definite (pivot {j} = {diag})"),
            ));
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..d {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }

    let mut x = b.clone();
    for c in 0..b.cols() {
        // Forward: L y = b
        for i in 0..d {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
        // Backward: Lᵀ x = y
        for i in (0..d).rev() {
            let mut v = x[(i, c)];
            for k in i + 1..d {
                v -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    Ok(x)
}

/// Relative tolerance for the numerical rank: `max(rows, cols) * eps * sigma_max`.
pub fn rank_tolerance<T: Scalar>(rows: usize, cols: usize, sigma_max: T) -> T {
    T::from_count(rows.max(cols)) * T::epsilon() * sigma_max
}

/// Count of singular values strictly above [`rank_tolerance`].
pub fn numerical_rank<T: Scalar>(a: &DenseMatrix<T>) -> Result<usize> {
    let s = svd(a)?.singular_values;
    Ok(rank_of_spectrum(a.rows(), a.cols(), &s))
}

pub(crate) fn rank_of_spectrum<T: Scalar>(rows: usize, cols: usize, s: &[T]) -> usize {
    let smax = s.first().copied().unwrap_or_else(T::zero);
    if smax == T::zero() {
        return 0;
    }
    let tol = rank_tolerance(rows, cols, smax);
    s.iter().filter(|&&v| v > tol).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms<T> {
    pub frobenius: T,
    pub l1: T,
    pub nuclear: T,
}

pub fn norms<T: Scalar>(a: &DenseMatrix<T>) -> Result<Norms<T>> {
    let nuclear = nuclear_norm(a)?;
    Ok(Norms {
        frobenius: a.frobenius_norm(),
        l1: a.l1_norm(),
        nuclear,
    })
}

pub fn nuclear_norm<T: Scalar>(a: &DenseMatrix<T>) -> Result<T> {
    Ok(svd(a)?
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| acc + s))
}
