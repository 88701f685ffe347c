//! Geometry primitives for the two manifolds the rest of the crate works on:
//! symmetric positive-definite matrices under the affine-invariant metric and
//! Grassmann subspaces under the principal-angle metric.
//!
//! Both manifolds expose the same vocabulary — log map, exp map, geodesic
//! distance — plus a Euclidean embedding (`embed_spd`, `embed_grassmann`)
//! used downstream wherever vector-space statistics are needed. Tangent
//! vectors carry their base point so maps can reject vectors anchored
//! elsewhere. Tangent norms are Riemannian: for any pair of points,
//! `dist(x, y)` equals the norm of `log_map(x, y)` on either manifold.

mod grassmann;
mod spd;

pub use grassmann::{
    GrassmannPoint, GrassmannTangent, embed_grassmann, grassmann_exp_map, grassmann_geodesic_dist,
    grassmann_log_map,
};
pub use spd::{
    SpdTangent, SymPosDef, embed_spd, spd_exp_map, spd_geodesic_dist, spd_log_map, spd_matrix_exp,
    spd_matrix_log,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Half-vectorization of a symmetric matrix: upper triangle scanned row by
/// row, off-diagonal entries scaled by √2 so the Euclidean inner product of
/// two outputs equals the Frobenius inner product of the inputs.
pub fn sym_vec(s: &DMatrix<f64>) -> DVector<f64> {
    let n = s.nrows();
    debug_assert_eq!(n, s.ncols(), "sym_vec needs a square matrix");
    let mut out = DVector::zeros(n * (n + 1) / 2);
    let mut idx = 0;
    for i in 0..n {
        out[idx] = s[(i, i)];
        idx += 1;
        for j in (i + 1)..n {
            out[idx] = SQRT_2 * 0.5 * (s[(i, j)] + s[(j, i)]);
            idx += 1;
        }
    }
    out
}

/// Inverse of [`sym_vec`] for a given matrix dimension.
pub fn sym_unvec(v: &DVector<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if v.len() != dim * (dim + 1) / 2 {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} does not hold the upper triangle of a {dim}×{dim} matrix",
            v.len()
        )));
    }
    let mut out = DMatrix::zeros(dim, dim);
    let mut idx = 0;
    for i in 0..dim {
        out[(i, i)] = v[idx];
        idx += 1;
        for j in (i + 1)..dim {
            let x = v[idx] / SQRT_2;
            out[(i, j)] = x;
            out[(j, i)] = x;
            idx += 1;
        }
    }
    Ok(out)
}
