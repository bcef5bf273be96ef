//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working copy are rotated pairwise until every pair is
//! orthogonal to within `eps * max(m, n)` relative to the product of their
//! norms. The converged column norms are the singular values. The relative
//! stopping rule makes the left singular vectors orthonormal even when the
//! singular values span many orders of magnitude. Columns whose norm falls
//! below `eps * ‖A‖_F` are treated as zero and their left singular vectors
//! are completed to an orthonormal basis.

use crate::error::{PmlError, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// `A = U diag(singular_values) Vᵀ` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    /// rows × k, orthonormal columns.
    pub u: DenseMatrix<T>,
    /// Non-increasing, non-negative, length k.
    pub singular_values: Vec<T>,
    /// cols × k, orthonormal columns.
    pub v: DenseMatrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// `U diag(values) Vᵀ` for a replacement spectrum of the same length.
    pub fn reconstruct_with(&self, values: &[T]) -> DenseMatrix<T> {
        assert_eq!(values.len(), self.singular_values.len());
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for (t, &s) in values.iter().enumerate() {
            if s == T::zero() {
                continue;
            }
            for i in 0..m {
                let us = self.u[(i, t)] * s;
                if us == T::zero() {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, o) in row.iter_mut().enumerate() {
                    *o += us * self.v[(j, t)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.reconstruct_with(&self.singular_values)
    }
}

pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    a.ensure_finite("svd")?;
    if a.rows() >= a.cols() {
        tall_svd(a)
    } else {
        // A = (Aᵀ)ᵀ = (U' Σ V'ᵀ)ᵀ = V' Σ U'ᵀ
        let t = tall_svd(&a.transpose())?;
        Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        })
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// SVD for rows ≥ cols.
fn tall_svd<T: Scalar>(a: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);

    // Column-major working copies of A and of the accumulated rotations V.
    let mut work: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();

    let tol = T::epsilon() * T::from_count(m.max(n));
    // Columns below this squared norm are rounding noise; they neither rotate
    // nor contribute a left singular vector of their own.
    let noise_floor = {
        let f = T::epsilon() * a.frobenius_norm();
        f * f
    };
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&work[p], &work[p]);
                let beta = dot(&work[q], &work[q]);
                let gamma = dot(&work[p], &work[q]);
                if gamma == T::zero()
                    || alpha <= noise_floor
                    || beta <= noise_floor
                    || gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt())
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut work, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(PmlError::numerical(
            "svd",
            format!("one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps"),
        ));
    }

    let norms: Vec<T> = work.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the decomposition deterministic under ties.
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));

    let floor = noise_floor.sqrt();
    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if norms[j] > floor && norms[j] > T::zero() {
            let inv = T::one() / norms[j];
            u_cols.push(work[j].iter().map(|&x| x * inv).collect());
        } else {
            u_cols.push(vec![T::zero(); m]);
            deficient.push(slot);
        }
    }
    complete_basis(&mut u_cols, &deficient);

    let singular_values: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let u = DenseMatrix::from_fn(m, n, |i, t| u_cols[t][i]);
    let v = DenseMatrix::from_fn(n, n, |i, t| v[order[t]][i]);
    Ok(SvdResult {
        u,
        singular_values,
        v,
    })
}

/// Fill the listed (zeroed) columns with unit vectors orthogonal to all others,
/// using twice-applied Gram–Schmidt on standard basis candidates.
fn complete_basis<T: Scalar>(cols: &mut [Vec<T>], deficient: &[usize]) {
    if deficient.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut filled: Vec<bool> = vec![true; cols.len()];
    for &d in deficient {
        filled[d] = false;
    }
    for &d in deficient {
        let mut best: Option<(T, Vec<T>)> = None;
        for e in 0..m {
            let mut cand = vec![T::zero(); m];
            cand[e] = T::one();
            for _ in 0..2 {
                for (k, col) in cols.iter().enumerate() {
                    if !filled[k] {
                        continue;
                    }
                    let proj = dot(col, &cand);
                    for (c, &x) in cand.iter_mut().zip(col) {
                        *c -= proj * x;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
            if norm > T::lit(0.5) {
                break;
            }
        }
        let (norm, cand) = best.expect("m >= 1 candidates");
        cols[d] = cand.into_iter().map(|x| x / norm).collect();
        filled[d] = true;
    }
}
