//! Small dense linear-algebra helpers shared across modules.
//!
//! Everything here works on `nalgebra` dynamic matrices and assumes the
//! symmetric inputs have already been validated (or symmetrized) by the
//! caller. Eigenvalue-based matrix functions symmetrize defensively so that
//! accumulated rounding in a product can never push them off the symmetric
//! code path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest eigenvalue are treated as
/// zero-or-negative when a positive-definite matrix is required.
pub(crate) const PD_EIG_RATIO_FLOOR: f64 = 1e-12;

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// Largest absolute difference between the matrix and its transpose.
pub(crate) fn symmetry_error(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// The input is symmetrized first; columns of `vectors` follow the sorted
/// order. Order and content are deterministic for identical input bits.
pub(crate) struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let eig = symmetrize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SortedEigen { values, vectors }
}

/// Apply `f` to the eigenvalues of a symmetric matrix: Q·diag(f(λ))·Qᵀ.
fn sym_eig_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = sorted_symmetric_eigen(m);
    let n = eig.values.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] * f(eig.values[j]));
    symmetrize(&(&scaled * eig.vectors.transpose()))
}

fn check_positive_spectrum(values: &DVector<f64>, what: &str) -> Result<()> {
    let max = values.iter().fold(0.0_f64, |a, &v| a.max(v));
    let floor = PD_EIG_RATIO_FLOOR * max;
    if max <= 0.0 || values.iter().any(|&v| v <= floor) {
        let min = values.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: eigenvalue range [{min:.3e}, {max:.3e}]"
        )));
    }
    Ok(())
}

/// Principal matrix logarithm of a symmetric positive-definite matrix.
pub(crate) fn sym_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sorted_symmetric_eigen(m);
    check_positive_spectrum(&eig.values, "matrix log")?;
    let n = eig.values.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] * eig.values[j].ln());
    Ok(symmetrize(&(&scaled * eig.vectors.transpose())))
}

/// Matrix exponential of a symmetric matrix.
pub(crate) fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_eig_map(m, f64::exp)
}

/// Square root and inverse square root of a symmetric positive-definite
/// matrix, from a single eigendecomposition.
pub(crate) fn sym_sqrt_pair(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = sorted_symmetric_eigen(m);
    check_positive_spectrum(&eig.values, "matrix square root")?;
    let n = eig.values.len();
    let root = DMatrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] * eig.values[j].sqrt());
    let inv = DMatrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] / eig.values[j].sqrt());
    Ok((
        symmetrize(&(&root * eig.vectors.transpose())),
        symmetrize(&(&inv * eig.vectors.transpose())),
    ))
}

/// Flip the sign of each column so its largest-magnitude entry is positive.
/// Ties take the first maximal entry, making the convention deterministic.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0_f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}
