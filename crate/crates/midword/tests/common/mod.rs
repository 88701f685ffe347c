//! Independent oracles and generators shared by the acceptance suite.
//! Everything here recomputes results through a different algorithm than
//! the library uses, so agreement is evidence rather than tautology.

use midword::alignment::PcaProjection;
use midword::codebook::KarcherCodebook;
use midword::manifold::{spd_geodesic_dist, GrassmannPoint, SymPosDef};
use midword::words::{MidLevelWord, WordKind, WordPoint};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> SymPosDef {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    SymPosDef::new(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.4)
        .expect("shifted Gram matrix is positive definite")
}

pub fn random_grassmann(d: usize, r: usize, rng: &mut ChaCha8Rng) -> GrassmannPoint {
    let a = DMatrix::from_fn(d, r, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q().columns(0, r).into_owned();
    GrassmannPoint::new(q).expect("orthonormalized basis")
}

pub fn spd_words(points: Vec<SymPosDef>, video_id: &str) -> Vec<MidLevelWord> {
    points
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            MidLevelWord::new(WordKind::Covariance, WordPoint::Spd(p), video_id, i)
                .expect("valid word")
        })
        .collect()
}

/// Matrix square root by the Denman-Beavers iteration, which touches none
/// of the library's eigendecomposition code.
pub fn denman_beavers_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().expect("iterate stays invertible");
        let z_inv = z.clone().try_inverse().expect("iterate stays invertible");
        let y_next = (&y + &z_inv) * 0.5;
        let z_next = (&z + &y_inv) * 0.5;
        let step = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if step < 1e-14 * (1.0 + y.norm()) {
            break;
        }
    }
    y
}

/// Closed-form geodesic midpoint of two SPD matrices:
/// x^1/2 (x^-1/2 y x^-1/2)^1/2 x^1/2, all square roots via Denman-Beavers.
pub fn spd_midpoint_closed_form(x: &SymPosDef, y: &SymPosDef) -> DMatrix<f64> {
    let root = denman_beavers_sqrt(x.matrix());
    let inv_root = root.clone().try_inverse().expect("SPD root is invertible");
    let inner = &inv_root * y.matrix() * &inv_root;
    &root * denman_beavers_sqrt(&inner) * &root
}

/// Brute-force VLAD accumulation: an explicit double loop over words and
/// centers with its own nearest-center search.
pub fn vlad_double_loop(
    codebook: &KarcherCodebook,
    pca: &PcaProjection,
    words: &[MidLevelWord],
) -> DVector<f64> {
    let m = codebook.size();
    let d = pca.output_dim();
    let centers: Vec<DVector<f64>> = codebook
        .centers()
        .iter()
        .map(|c| {
            let embedded = match c {
                WordPoint::Subspace(u) => midword::manifold::embed_grassmann(u),
                WordPoint::Spd(s) => midword::manifold::embed_spd(s).expect("embeddable"),
            };
            pca.project(&embedded).expect("projectable")
        })
        .collect();
    let mut acc = DVector::<f64>::zeros(m * d);
    for word in words {
        let mut nearest = 0;
        let mut best = f64::INFINITY;
        for (i, center) in codebook.centers().iter().enumerate() {
            let dist = midword::codebook::word_point_distance(word.point(), center)
                .expect("comparable points");
            if dist < best {
                best = dist;
                nearest = i;
            }
        }
        let embedded = match word.point() {
            WordPoint::Subspace(u) => midword::manifold::embed_grassmann(u),
            WordPoint::Spd(s) => midword::manifold::embed_spd(s).expect("embeddable"),
        };
        let projected = pca.project(&embedded).expect("projectable");
        for j in 0..d {
            acc[nearest * d + j] += projected[j] - centers[nearest][j];
        }
    }
    acc
}

/// Log-likelihood of diagonal-covariance mixture data, written directly
/// from the density formula.
pub fn mixture_log_likelihood(
    weights: &DVector<f64>,
    means: &DMatrix<f64>,
    variances: &DMatrix<f64>,
    points: &[DVector<f64>],
) -> f64 {
    let m = weights.len();
    let d = means.ncols();
    let mut total = 0.0;
    for x in points {
        let mut terms = Vec::with_capacity(m);
        for c in 0..m {
            let mut log_density = weights[c].ln();
            for j in 0..d {
                let var = variances[(c, j)];
                let diff = x[j] - means[(c, j)];
                log_density +=
                    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - diff * diff / (2.0 * var);
            }
            terms.push(log_density);
        }
        let peak = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
        total += peak + sum.ln();
    }
    total
}

/// Fraction of points whose cluster assignment matches the true labels
/// under the best relabeling of three clusters.
pub fn best_three_way_recovery(assignments: &[usize], truth: &[usize]) -> f64 {
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = 0usize;
    for perm in perms {
        let hits = assignments
            .iter()
            .zip(truth)
            .filter(|(a, t)| perm[**a] == **t)
            .count();
        best = best.max(hits);
    }
    best as f64 / truth.len() as f64
}

/// Three tight SPD clusters around well-separated anchors; returns the
/// points and their true cluster labels.
pub fn three_spd_clusters(per_cluster: usize, seed: u64) -> (Vec<SymPosDef>, Vec<usize>) {
    use midword::manifold::{spd_exp_map, SpdTangent};
    // Pairwise anchor distances are 6.0, 8.5, and 10.4 while in-cluster
    // diameters stay near 0.1, so any sane seeding separates the clusters.
    let anchors = [
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![400.0, 1.0, 1.0])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 400.0, 0.0025])),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (label, anchor) in anchors.iter().enumerate() {
        let base = SymPosDef::new(anchor.clone()).expect("diagonal anchor is SPD");
        let root = DMatrix::from_diagonal(&anchor.diagonal().map(f64::sqrt));
        for _ in 0..per_cluster {
            let raw = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.02..0.02));
            let sym = (&raw + raw.transpose()) * 0.5;
            // Conjugating by the anchor root keeps the intrinsic radius near
            // the raw entry scale however ill-conditioned the anchor is.
            let coords = &root * sym * &root;
            let tangent = SpdTangent::new(base.clone(), coords).expect("valid tangent");
            points.push(spd_exp_map(&base, &tangent).expect("exp of small tangent"));
            labels.push(label);
        }
    }
    (points, labels)
}

/// Sanity helper: the library's distance agrees with a from-scratch
/// whitened-eigenvalue computation on one pair, guarding the oracle set
/// itself against drift.
pub fn check_spd_distance_oracle(x: &SymPosDef, y: &SymPosDef) {
    let root = denman_beavers_sqrt(x.matrix());
    let inv_root = root.try_inverse().expect("SPD root is invertible");
    let whitened = &inv_root * y.matrix() * &inv_root;
    let eigen = whitened.symmetric_eigen();
    let expected: f64 = eigen
        .eigenvalues
        .iter()
        .map(|l| l.ln().powi(2))
        .sum::<f64>()
        .sqrt();
    let got = spd_geodesic_dist(x, y).expect("valid pair");
    assert!(
        (got - expected).abs() <= 1e-9 * (1.0 + expected),
        "distance {got} deviates from whitened-spectrum value {expected}"
    );
}

pub use rand::SeedableRng;
