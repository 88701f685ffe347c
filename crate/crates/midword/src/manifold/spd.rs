//! Symmetric positive-definite matrices under the affine-invariant metric.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{
    PD_EIG_RATIO_FLOOR, all_finite, max_abs, sorted_symmetric_eigen, sym_exp, sym_log,
    sym_sqrt_pair, symmetrize, symmetry_error,
};

/// Relative tolerance for accepting a matrix as symmetric.
const SYM_TOL: f64 = 1e-10;

/// A validated symmetric positive-definite matrix.
///
/// Construction symmetrizes the input and proves positive definiteness with a
/// Cholesky factorization; the stored matrix is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPosDef {
    mat: DMatrix<f64>,
}

impl SymPosDef {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a nonempty square matrix, got {}×{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !all_finite(&mat) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = max_abs(&mat);
        if symmetry_error(&mat) > SYM_TOL * scale {
            return Err(Error::InvalidInput(
                "matrix is not symmetric within tolerance".into(),
            ));
        }
        let sym = symmetrize(&mat);
        if Cholesky::new(sym.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "Cholesky factorization failed".into(),
            ));
        }
        Ok(Self { mat: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    fn cholesky(&self) -> Cholesky<f64, Dyn> {
        Cholesky::new(self.mat.clone()).expect("validated at construction")
    }

    /// Whitened chart at this point; see [`SpdChart`].
    pub(crate) fn chart(&self) -> Result<SpdChart> {
        let (root, inv_root) = sym_sqrt_pair(&self.mat)?;
        Ok(SpdChart { root, inv_root })
    }
}

/// Precomputed square-root factors of a base point.
///
/// In the whitened chart w = X^{−1/2}·V·X^{−1/2} the Riemannian metric at X
/// becomes the plain Frobenius inner product, so averaging, norms, and the
/// exp map all take their Euclidean form. Used by iterative algorithms that
/// take many log/exp steps at one base.
pub(crate) struct SpdChart {
    root: DMatrix<f64>,
    inv_root: DMatrix<f64>,
}

impl SpdChart {
    /// Whitened tangent coordinates of `target`; Frobenius norm equals the
    /// geodesic distance from the base.
    pub(crate) fn log(&self, target: &SymPosDef) -> Result<DMatrix<f64>> {
        let inner = symmetrize(&(&self.inv_root * target.matrix() * &self.inv_root));
        sym_log(&inner)
    }

    pub(crate) fn exp(&self, w: &DMatrix<f64>) -> Result<SymPosDef> {
        let e = sym_exp(&symmetrize(w));
        SymPosDef::new(&self.root * e * &self.root)
    }

    /// Tangent coordinates in the ambient (unwhitened) representation.
    pub(crate) fn unwhiten(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.root * w * &self.root))
    }
}

/// A tangent vector at a point of the SPD manifold.
///
/// Coordinates are a symmetric matrix in the ambient representation; the
/// base point rides along so exp maps can verify the anchoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdTangent {
    base: SymPosDef,
    coords: DMatrix<f64>,
}

impl SpdTangent {
    pub fn new(base: SymPosDef, coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() != base.dim() || coords.ncols() != base.dim() {
            return Err(Error::DimensionMismatch(format!(
                "tangent coordinates {}×{} at a base of dim {}",
                coords.nrows(),
                coords.ncols(),
                base.dim()
            )));
        }
        if !all_finite(&coords) {
            return Err(Error::InvalidInput(
                "tangent coordinates have non-finite entries".into(),
            ));
        }
        if symmetry_error(&coords) > SYM_TOL * max_abs(&coords) {
            return Err(Error::InvalidInput(
                "tangent coordinates are not symmetric within tolerance".into(),
            ));
        }
        Ok(Self {
            base,
            coords: symmetrize(&coords),
        })
    }

    pub fn zero(base: SymPosDef) -> Self {
        let d = base.dim();
        Self {
            base,
            coords: DMatrix::zeros(d, d),
        }
    }

    pub fn base(&self) -> &SymPosDef {
        &self.base
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Riemannian norm at the base point: ‖X^{−1/2}·V·X^{−1/2}‖_F. Equals
    /// the geodesic distance from the base to the exp of this vector.
    pub fn norm(&self) -> f64 {
        // L^{-1}·V·L^{-T} differs from the whitened coordinates by an
        // orthogonal congruence, so the Frobenius norm is the same.
        let chol = self.base.cholesky();
        let l = chol.l();
        let a = l
            .solve_lower_triangular(&self.coords)
            .expect("Cholesky factor is invertible");
        let w = l
            .solve_lower_triangular(&a.transpose())
            .expect("Cholesky factor is invertible");
        w.norm()
    }
}

/// Principal logarithm of an SPD matrix: Q·diag(ln λ)·Qᵀ.
pub fn spd_matrix_log(x: &SymPosDef) -> Result<DMatrix<f64>> {
    sym_log(x.matrix())
}

/// Matrix exponential of a symmetric matrix; the result is SPD.
pub fn spd_matrix_exp(v: &DMatrix<f64>) -> Result<SymPosDef> {
    if v.nrows() != v.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}×{}",
            v.nrows(),
            v.ncols()
        )));
    }
    if !all_finite(v) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if symmetry_error(v) > SYM_TOL * max_abs(v) {
        return Err(Error::InvalidInput(
            "matrix is not symmetric within tolerance".into(),
        ));
    }
    SymPosDef::new(sym_exp(v))
}

/// Log map under the affine-invariant metric:
/// X^{1/2}·log(X^{−1/2}·Y·X^{−1/2})·X^{1/2}.
pub fn spd_log_map(base: &SymPosDef, target: &SymPosDef) -> Result<SpdTangent> {
    if base.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "base dim {} vs target dim {}",
            base.dim(),
            target.dim()
        )));
    }
    let chart = base.chart()?;
    let w = chart.log(target)?;
    SpdTangent::new(base.clone(), chart.unwhiten(&w))
}

/// Exp map under the affine-invariant metric; inverse of [`spd_log_map`].
pub fn spd_exp_map(base: &SymPosDef, v: &SpdTangent) -> Result<SymPosDef> {
    if v.base().dim() != base.dim() {
        return Err(Error::DimensionMismatch(format!(
            "tangent base dim {} vs base dim {}",
            v.base().dim(),
            base.dim()
        )));
    }
    if v.base() != base {
        return Err(Error::InvalidInput(
            "tangent vector is anchored at a different base point".into(),
        ));
    }
    let chart = base.chart()?;
    let w = symmetrize(&(&chart.inv_root * v.coords() * &chart.inv_root));
    chart.exp(&w)
}

/// Geodesic distance ‖log(X^{−1/2}·Y·X^{−1/2})‖_F. Invariant under joint
/// congruence by any invertible matrix.
pub fn spd_geodesic_dist(x: &SymPosDef, y: &SymPosDef) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    // Identical matrices are at distance exactly 0; going through the
    // whitening would leave rounding noise instead.
    if x.matrix() == y.matrix() {
        return Ok(0.0);
    }
    let chart = x.chart()?;
    let inner = symmetrize(&(&chart.inv_root * y.matrix() * &chart.inv_root));
    let eig = sorted_symmetric_eigen(&inner);
    let max = eig.values.max();
    if max <= 0.0 || eig.values.iter().any(|&v| v <= PD_EIG_RATIO_FLOOR * max) {
        return Err(Error::NotPositiveDefinite(
            "whitened matrix lost positive definiteness".into(),
        ));
    }
    Ok(eig
        .values
        .iter()
        .map(|&v| v.ln().powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Euclidean embedding through the tangent space at the identity:
/// sym_vec(log C), of length d(d+1)/2.
pub fn embed_spd(c: &SymPosDef) -> Result<DVector<f64>> {
    Ok(super::sym_vec(&spd_matrix_log(c)?))
}
