//! Random objects for unit tests. Everything is driven by a caller-seeded
//! RNG so failures reproduce exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::manifold::{GrassmannPoint, SymPosDef};

pub(crate) fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> SymPosDef {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
    SymPosDef::new(m).unwrap()
}

/// Uniform-ish random subspace: orthonormalized Gaussian matrix.
pub(crate) fn random_grassmann(d: usize, r: usize, rng: &mut ChaCha8Rng) -> GrassmannPoint {
    loop {
        let a = DMatrix::from_fn(d, r, |_, _| rng.random_range(-1.0..1.0));
        let q = a.qr().q();
        if let Ok(p) = GrassmannPoint::new(q.columns(0, r).into_owned()) {
            return p;
        }
    }
}

pub(crate) fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Deliberately independent of the eigenvalue path used by the
/// library code, so tests can cross-check spectra.
pub(crate) fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[(p, i)];
                    let aqi = a[(q, i)];
                    a[(p, i)] = c * api - s * aqi;
                    a[(q, i)] = s * api + c * aqi;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}
