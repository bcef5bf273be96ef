//! Symmetric eigendecomposition by the cyclic Jacobi method.

use crate::error::{PmlError, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// `A = Q diag(eigenvalues) Qᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigResult<T> {
    pub q: DenseMatrix<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Scalar> EigResult<T> {
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let n = self.eigenvalues.len();
        let scaled = DenseMatrix::from_fn(n, n, |i, j| self.q[(i, j)] * self.eigenvalues[j]);
        scaled.matmul(&self.q.transpose()).expect("square factors")
    }
}

pub(crate) fn check_symmetric<T: Scalar>(a: &DenseMatrix<T>, op: &'static str) -> Result<()> {
    let (n, m) = a.shape();
    if n != m {
        return Err(PmlError::contract(
            op,
            format!("matrix is {n}x{m}, not square"),
        ));
    }
    let tol = T::tol_floor(1e-10) * a.frobenius_norm().max(T::one());
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return Err(PmlError::contract(
                    op,
                    format!("asymmetric at ({i},{j}): {} vs {}", a[(i, j)], a[(j, i)]),
                ));
            }
        }
    }
    Ok(())
}

pub fn sym_eig<T: Scalar>(a: &DenseMatrix<T>) -> Result<EigResult<T>> {
    a.ensure_finite("sym_eig")?;
    check_symmetric(a, "sym_eig")?;
    let n = a.rows();
    // Work on the exactly symmetrized copy.
    let half = T::lit(0.5);
    let mut s = DenseMatrix::from_fn(n, n, |i, j| half * (a[(i, j)] + a[(j, i)]));
    let mut q = DenseMatrix::<T>::identity(n);

    let scale = s.frobenius_norm();
    let target = T::epsilon() * scale;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&s);
        if off <= target || scale == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for r in p + 1..n {
                let apq = s[(p, r)];
                if apq == T::zero() {
                    continue;
                }
                let (c, sn) = sym_schur2(s[(p, p)], apq, s[(r, r)]);
                apply_rotation(&mut s, &mut q, p, r, c, sn);
            }
        }
    }
    if !converged {
        return Err(PmlError::numerical(
            "sym_eig",
            format!("Jacobi did not converge in {MAX_SWEEPS} sweeps"),
        ));
    }

    let diag: Vec<T> = (0..n).map(|i| s[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    Ok(EigResult {
        q: DenseMatrix::from_fn(n, n, |i, j| q[(i, order[j])]),
        eigenvalues: order.iter().map(|&i| diag[i]).collect(),
    })
}

fn off_diagonal_norm<T: Scalar>(s: &DenseMatrix<T>) -> T {
    let n = s.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += s[(i, j)] * s[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Rotation (c, s) annihilating the off-diagonal of a symmetric 2×2 block.
fn sym_schur2<T: Scalar>(app: T, apq: T, aqq: T) -> (T, T) {
    let tau = (aqq - app) / (T::lit(2.0) * apq);
    let t = if tau >= T::zero() {
        T::one() / (tau + (T::one() + tau * tau).sqrt())
    } else {
        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    (c, t * c)
}

/// S ← Jᵀ S J, Q ← Q J for the Givens rotation J in plane (p, r).
fn apply_rotation<T: Scalar>(
    s: &mut DenseMatrix<T>,
    q: &mut DenseMatrix<T>,
    p: usize,
    r: usize,
    c: T,
    sn: T,
) {
    let n = s.rows();
    for k in 0..n {
        let (skp, skr) = (s[(k, p)], s[(k, r)]);
        s[(k, p)] = c * skp - sn * skr;
        s[(k, r)] = sn * skp + c * skr;
    }
    for k in 0..n {
        let (spk, srk) = (s[(p, k)], s[(r, k)]);
        s[(p, k)] = c * spk - sn * srk;
        s[(r, k)] = sn * spk + c * srk;
    }
    s[(p, r)] = T::zero();
    s[(r, p)] = T::zero();
    for k in 0..n {
        let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
        q[(k, p)] = c * qkp - sn * qkr;
        q[(k, r)] = sn * qkp + c * qkr;
    }
}
