//! Grassmann manifold of r-dimensional subspaces of R^d, represented by
//! orthonormal basis matrices. All operations are invariant to the choice of
//! basis within a subspace.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, max_abs};

const ORTHO_TOL: f64 = 1e-10;
const HORIZONTAL_TOL: f64 = 1e-8;
/// Smallest singular value of baseᵀ·target accepted by the log map; below
/// this the target sits at or beyond the cut locus of the base.
const CUT_LOCUS_TOL: f64 = 1e-10;

/// A point on the Grassmann manifold: a subspace given by an orthonormal
/// d×r basis matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    basis: DMatrix<f64>,
}

impl GrassmannPoint {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (d, r) = (basis.nrows(), basis.ncols());
        if r == 0 || r > d {
            return Err(Error::InvalidInput(format!(
                "basis must be d×r with 0 < r ≤ d, got {d}×{r}"
            )));
        }
        if !all_finite(&basis) {
            return Err(Error::InvalidInput("basis has non-finite entries".into()));
        }
        let gram = basis.transpose() * &basis;
        let defect = max_abs(&(gram - DMatrix::identity(r, r)));
        if defect > ORTHO_TOL {
            return Err(Error::InvalidInput(format!(
                "basis columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Projection matrix U·Uᵀ; identical for every basis of the subspace.
    pub fn projection(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.ambient_dim() != other.ambient_dim()
            || self.subspace_dim() != other.subspace_dim()
        {
            return Err(Error::DimensionMismatch(format!(
                "Grassmann points of shape {}×{} vs {}×{}",
                self.ambient_dim(),
                self.subspace_dim(),
                other.ambient_dim(),
                other.subspace_dim()
            )));
        }
        Ok(())
    }
}

/// A tangent vector at a point of the Grassmann manifold, stored as a d×r
/// horizontal matrix (columns orthogonal to the base subspace).
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannTangent {
    base: GrassmannPoint,
    coords: DMatrix<f64>,
}

impl GrassmannTangent {
    pub fn new(base: GrassmannPoint, coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() != base.ambient_dim() || coords.ncols() != base.subspace_dim() {
            return Err(Error::DimensionMismatch(format!(
                "tangent coordinates {}×{} at a base of shape {}×{}",
                coords.nrows(),
                coords.ncols(),
                base.ambient_dim(),
                base.subspace_dim()
            )));
        }
        if !all_finite(&coords) {
            return Err(Error::InvalidInput(
                "tangent coordinates have non-finite entries".into(),
            ));
        }
        let overlap = max_abs(&(base.basis().transpose() * &coords));
        if overlap > HORIZONTAL_TOL {
            return Err(Error::InvalidInput(format!(
                "tangent is not horizontal at its base (overlap {overlap:.3e})"
            )));
        }
        Ok(Self { base, coords })
    }

    pub fn zero(base: GrassmannPoint) -> Self {
        let (d, r) = (base.ambient_dim(), base.subspace_dim());
        Self {
            base,
            coords: DMatrix::zeros(d, r),
        }
    }

    pub fn base(&self) -> &GrassmannPoint {
        &self.base
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Riemannian norm; equals the geodesic distance from the base to the
    /// exp of this vector while every principal angle stays below π/2.
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// Principal angles between two subspaces: θᵢ = arccos of the singular
/// values of U1ᵀ·U2, clamped into [0, 1].
fn principal_angles(u1: &GrassmannPoint, u2: &GrassmannPoint) -> Vec<f64> {
    let overlap = u1.basis().transpose() * u2.basis();
    overlap
        .singular_values()
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect()
}

/// Geodesic distance √(Σ θᵢ²) over the principal angles.
pub fn grassmann_geodesic_dist(u1: &GrassmannPoint, u2: &GrassmannPoint) -> Result<f64> {
    u1.same_shape(u2)?;
    // An identical basis spans the same subspace at distance exactly 0.
    if u1.basis() == u2.basis() {
        return Ok(0.0);
    }
    Ok(principal_angles(u1, u2)
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt())
}

/// Log map: from the thin SVD (I − U·Uᵀ)·V·(UᵀV)^{−1} = Q·S·Rᵀ the tangent
/// is Q·atan(S)·Rᵀ. Defined only while UᵀV is nonsingular, i.e. every
/// principal angle is below π/2.
pub fn grassmann_log_map(
    base: &GrassmannPoint,
    target: &GrassmannPoint,
) -> Result<GrassmannTangent> {
    base.same_shape(target)?;
    let r = base.subspace_dim();
    let overlap = base.basis().transpose() * target.basis();
    let svd = overlap.svd(true, true);
    let min_sv = svd.singular_values.min();
    if min_sv < CUT_LOCUS_TOL {
        return Err(Error::CutLocus(format!(
            "baseᵀ·target is singular (smallest singular value {min_sv:.3e})"
        )));
    }
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let inv_sv = DMatrix::from_fn(r, r, |i, j| {
        if i == j { 1.0 / svd.singular_values[i] } else { 0.0 }
    });
    let overlap_inv = v_t.transpose() * inv_sv * u.transpose();
    // (I − U·Uᵀ)·V·(UᵀV)^{−1} simplifies to V·(UᵀV)^{−1} − U.
    let h = target.basis() * overlap_inv - base.basis();
    let hsvd = h.svd(true, true);
    let q = hsvd.u.as_ref().expect("requested");
    let r_t = hsvd.v_t.as_ref().expect("requested");
    let atan = DMatrix::from_fn(r, r, |i, j| {
        if i == j { hsvd.singular_values[i].atan() } else { 0.0 }
    });
    GrassmannTangent::new(base.clone(), q * atan * r_t)
}

/// Exp map: with the thin SVD v = Q·S·Rᵀ the endpoint is the
/// orthonormalization of U·R·cos(S)·Rᵀ + Q·sin(S)·Rᵀ.
pub fn grassmann_exp_map(base: &GrassmannPoint, v: &GrassmannTangent) -> Result<GrassmannPoint> {
    if v.base().ambient_dim() != base.ambient_dim()
        || v.base().subspace_dim() != base.subspace_dim()
    {
        return Err(Error::DimensionMismatch(
            "tangent shape does not match the base point".into(),
        ));
    }
    if v.base() != base {
        return Err(Error::InvalidInput(
            "tangent vector is anchored at a different base point".into(),
        ));
    }
    let r = base.subspace_dim();
    let svd = v.coords().clone().svd(true, true);
    let q = svd.u.as_ref().expect("requested");
    let r_t = svd.v_t.as_ref().expect("requested");
    let cos = DMatrix::from_fn(r, r, |i, j| {
        if i == j { svd.singular_values[i].cos() } else { 0.0 }
    });
    let sin = DMatrix::from_fn(r, r, |i, j| {
        if i == j { svd.singular_values[i].sin() } else { 0.0 }
    });
    let raw = base.basis() * (r_t.transpose() * cos * r_t) + q * sin * r_t;
    let thin_q = raw.qr().q().columns(0, r).into_owned();
    GrassmannPoint::new(thin_q)
}

/// Euclidean embedding through the projection matrix: sym_vec(U·Uᵀ), of
/// length d(d+1)/2. Distances between embeddings equal the projection-metric
/// distance ‖U1U1ᵀ − U2U2ᵀ‖_F.
pub fn embed_grassmann(u: &GrassmannPoint) -> DVector<f64> {
    super::sym_vec(&u.projection())
}
