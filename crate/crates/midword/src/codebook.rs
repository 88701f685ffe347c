//! Intrinsic codebooks over mid-level words: Karcher means, K-Karcher-means
//! clustering, and a Gaussian mixture fitted on embedded words.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alignment::{PcaProjection, fit_pca};
use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::manifold::{
    GrassmannPoint, GrassmannTangent, SymPosDef, embed_grassmann, embed_spd,
    grassmann_exp_map, grassmann_geodesic_dist, grassmann_log_map, spd_geodesic_dist,
};
use crate::words::{MidLevelWord, WordKind, WordPoint};

pub const KARCHER_DEFAULT_TOL: f64 = 1e-10;
pub const KARCHER_DEFAULT_MAX_ITER: usize = 50;
pub const K_KARCHER_DEFAULT_MAX_ITER: usize = 100;
/// Codebook centers closer than this are considered duplicates.
const CENTER_DISTINCT_TOL: f64 = 1e-8;

const EM_MAX_ITER: usize = 200;
const EM_REL_TOL: f64 = 1e-5;
const EM_CHUNK: usize = 1024;
const VARIANCE_FLOOR_RATIO: f64 = 1e-6;

/// Geodesic distance between two word payloads of the same manifold type.
pub fn word_point_distance(a: &WordPoint, b: &WordPoint) -> Result<f64> {
    match (a, b) {
        (WordPoint::Spd(x), WordPoint::Spd(y)) => spd_geodesic_dist(x, y),
        (WordPoint::Subspace(x), WordPoint::Subspace(y)) => grassmann_geodesic_dist(x, y),
        _ => Err(Error::KindMismatch(
            "cannot measure a distance between different manifolds".into(),
        )),
    }
}

fn check_same_shape(points: &[&WordPoint]) -> Result<()> {
    let first = points[0];
    for p in points.iter().skip(1) {
        match (first, p) {
            (WordPoint::Spd(a), WordPoint::Spd(b)) if a.dim() == b.dim() => {}
            (WordPoint::Subspace(a), WordPoint::Subspace(b))
                if a.ambient_dim() == b.ambient_dim()
                    && a.subspace_dim() == b.subspace_dim() => {}
            (WordPoint::Spd(_), WordPoint::Spd(_))
            | (WordPoint::Subspace(_), WordPoint::Subspace(_)) => {
                return Err(Error::DimensionMismatch(
                    "words have differing payload shapes".into(),
                ));
            }
            _ => {
                return Err(Error::KindMismatch(
                    "words mix Grassmann and SPD payloads".into(),
                ));
            }
        }
    }
    Ok(())
}

/// One fixed-point iteration scheme for both manifolds: move to the exp of
/// the mean log until the mean tangent is negligible. SPD work happens in
/// the whitened chart where the Frobenius norm is the Riemannian norm.
fn karcher_iterate_spd(
    init: SymPosDef,
    points: &[&SymPosDef],
    max_iter: usize,
    tol: f64,
) -> Result<SymPosDef> {
    let n = points.len() as f64;
    let mut x = init;
    for _ in 0..max_iter {
        let chart = x.chart()?;
        let logs: Vec<DMatrix<f64>> = points
            .par_iter()
            .map(|p| chart.log(p))
            .collect::<Result<_>>()?;
        let mut mean = DMatrix::zeros(x.dim(), x.dim());
        for w in &logs {
            mean += w;
        }
        mean /= n;
        if mean.norm_squared() < tol {
            break;
        }
        x = chart.exp(&mean)?;
    }
    Ok(x)
}

fn karcher_iterate_grassmann(
    init: GrassmannPoint,
    points: &[&GrassmannPoint],
    max_iter: usize,
    tol: f64,
) -> Result<GrassmannPoint> {
    let n = points.len() as f64;
    let mut x = init;
    for _ in 0..max_iter {
        let logs: Vec<GrassmannTangent> = points
            .par_iter()
            .map(|p| grassmann_log_map(&x, p))
            .collect::<Result<_>>()?;
        let mut mean = DMatrix::zeros(x.ambient_dim(), x.subspace_dim());
        for v in &logs {
            mean += v.coords();
        }
        mean /= n;
        if mean.norm_squared() < tol {
            break;
        }
        let step = GrassmannTangent::new(x.clone(), mean)?;
        x = grassmann_exp_map(&x, &step)?;
    }
    Ok(x)
}

/// Minimizer of the summed squared projection-metric distance: the span of
/// the leading eigenvectors of the average projection matrix. Used as a
/// restart point when the first-word initializer hits a cut locus.
fn extrinsic_mean_grassmann(points: &[&GrassmannPoint]) -> Result<GrassmannPoint> {
    let d = points[0].ambient_dim();
    let r = points[0].subspace_dim();
    let mut avg = DMatrix::zeros(d, d);
    for p in points {
        avg += p.projection();
    }
    avg /= points.len() as f64;
    let eig = sorted_symmetric_eigen(&avg);
    GrassmannPoint::new(eig.vectors.columns(0, r).into_owned())
}

fn karcher_mean_spd(
    points: &[&SymPosDef],
    max_iter: usize,
    tol: f64,
) -> Result<SymPosDef> {
    karcher_iterate_spd(points[0].clone(), points, max_iter, tol)
}

fn karcher_mean_grassmann(
    points: &[&GrassmannPoint],
    max_iter: usize,
    tol: f64,
) -> Result<GrassmannPoint> {
    match karcher_iterate_grassmann(points[0].clone(), points, max_iter, tol) {
        Ok(x) => Ok(x),
        Err(Error::CutLocus(_)) => {
            let init = extrinsic_mean_grassmann(points)?;
            karcher_iterate_grassmann(init, points, max_iter, tol)
        }
        Err(e) => Err(e),
    }
}

fn karcher_mean_points(
    points: &[&WordPoint],
    max_iter: usize,
    tol: f64,
) -> Result<WordPoint> {
    match points[0] {
        WordPoint::Spd(_) => {
            let spds: Vec<&SymPosDef> = points
                .iter()
                .map(|p| match p {
                    WordPoint::Spd(x) => x,
                    WordPoint::Subspace(_) => unreachable!("checked same kind"),
                })
                .collect();
            Ok(WordPoint::Spd(karcher_mean_spd(&spds, max_iter, tol)?))
        }
        WordPoint::Subspace(_) => {
            let subs: Vec<&GrassmannPoint> = points
                .iter()
                .map(|p| match p {
                    WordPoint::Subspace(x) => x,
                    WordPoint::Spd(_) => unreachable!("checked same kind"),
                })
                .collect();
            Ok(WordPoint::Subspace(karcher_mean_grassmann(
                &subs, max_iter, tol,
            )?))
        }
    }
}

/// Karcher (Fréchet) mean of same-kind words: the fixed point of
/// X ← exp_X(mean of log_X(X_i)), initialized at the first word.
///
/// On the Grassmann manifold a cut-locus failure triggers one retry from
/// the extrinsic mean before the error propagates.
pub fn karcher_mean(
    words: &[MidLevelWord],
    max_iter: usize,
    tol: f64,
) -> Result<WordPoint> {
    if words.is_empty() {
        return Err(Error::Empty("karcher_mean of no words".into()));
    }
    let kind = words[0].kind();
    if words.iter().any(|w| w.kind() != kind) {
        return Err(Error::KindMismatch("words are not all of one kind".into()));
    }
    let points: Vec<&WordPoint> = words.iter().map(|w| w.point()).collect();
    check_same_shape(&points)?;
    karcher_mean_points(&points, max_iter, tol)
}

/// A codebook of M Karcher cluster centers on one manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct KarcherCodebook {
    kind: WordKind,
    centers: Vec<WordPoint>,
}

impl KarcherCodebook {
    pub fn from_parts(kind: WordKind, centers: Vec<WordPoint>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Empty("codebook needs at least one center".into()));
        }
        let refs: Vec<&WordPoint> = centers.iter().collect();
        check_same_shape(&refs)?;
        let expects_spd = !matches!(kind, WordKind::Subspace);
        let is_spd = matches!(centers[0], WordPoint::Spd(_));
        if expects_spd != is_spd {
            return Err(Error::KindMismatch(format!(
                "kind {kind} does not match the center payload type"
            )));
        }
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let d = word_point_distance(&centers[i], &centers[j])?;
                if d <= CENTER_DISTINCT_TOL {
                    return Err(Error::Degenerate(format!(
                        "centers {i} and {j} coincide (distance {d:.3e})"
                    )));
                }
            }
        }
        Ok(Self { kind, centers })
    }

    pub fn kind(&self) -> WordKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[WordPoint] {
        &self.centers
    }

    /// Geodesic distances from one word to every center.
    pub fn distances_to(&self, point: &WordPoint) -> Result<Vec<f64>> {
        self.centers
            .iter()
            .map(|c| word_point_distance(c, point))
            .collect()
    }

    /// Index of the nearest center and its distance; ties resolve to the
    /// lower index.
    pub fn nearest_center(&self, point: &WordPoint) -> Result<(usize, f64)> {
        let d = self.distances_to(point)?;
        let mut best = 0;
        for (i, &v) in d.iter().enumerate().skip(1) {
            if v < d[best] {
                best = i;
            }
        }
        Ok((best, d[best]))
    }
}

/// How K-Karcher-means chooses its initial centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookInit {
    /// Distance-weighted seeding over geodesic distances.
    KmeansPlusPlus,
    /// M distinct words drawn uniformly.
    RandomSample,
}

/// Result of [`k_karcher_means`]: the codebook, the objective value after
/// each assignment step, and the final word-to-center assignment.
#[derive(Debug, Clone)]
pub struct KKarcherFit {
    pub codebook: KarcherCodebook,
    pub objective: Vec<f64>,
    pub assignments: Vec<usize>,
}

fn kmeans_pp_geodesic(
    points: &[&WordPoint],
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let n = points.len();
    let mut chosen = Vec::with_capacity(m);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = points
        .par_iter()
        .map(|p| word_point_distance(p, points[chosen[0]]).map(|d| d * d))
        .collect::<Result<_>>()?;
    while chosen.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Remaining mass is zero; take the lowest unchosen index.
            (0..n)
                .find(|i| !chosen.contains(i))
                .expect("m <= n leaves an unchosen index")
        };
        chosen.push(next);
        let fresh: Vec<f64> = points
            .par_iter()
            .map(|p| word_point_distance(p, points[next]).map(|d| d * d))
            .collect::<Result<_>>()?;
        for i in 0..n {
            if fresh[i] < d2[i] {
                d2[i] = fresh[i];
            }
        }
    }
    Ok(chosen)
}

fn random_distinct(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(m);
    indices
}

/// K-Karcher-means clustering of same-kind words into M centers.
///
/// Alternates nearest-center assignment (ties to the lower index) with
/// Karcher-mean center updates until the assignment stops changing or
/// `max_iter` passes. The objective Σ d² after each assignment step is
/// non-increasing: a center update is kept only if it does not worsen its
/// cluster's cost, and empty clusters are repaired by promoting the
/// globally farthest word to a singleton center, which can only shrink the
/// objective. Deterministic for a given seed and independent of the worker
/// count.
pub fn k_karcher_means(
    words: &[MidLevelWord],
    m: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KKarcherFit> {
    k_karcher_means_with(words, m, seed, max_iter, CodebookInit::KmeansPlusPlus)
}

/// [`k_karcher_means`] with an explicit initialization strategy.
pub fn k_karcher_means_with(
    words: &[MidLevelWord],
    m: usize,
    seed: u64,
    max_iter: usize,
    init: CodebookInit,
) -> Result<KKarcherFit> {
    if words.is_empty() {
        return Err(Error::Empty("cannot build a codebook from no words".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("codebook size must be positive".into()));
    }
    if words.len() < m {
        return Err(Error::TooFewSamples(format!(
            "{} words for {m} centers",
            words.len()
        )));
    }
    let kind = words[0].kind();
    if words.iter().any(|w| w.kind() != kind) {
        return Err(Error::KindMismatch("words are not all of one kind".into()));
    }
    let points: Vec<&WordPoint> = words.iter().map(|w| w.point()).collect();
    check_same_shape(&points)?;
    let n = points.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = match init {
        CodebookInit::KmeansPlusPlus => kmeans_pp_geodesic(&points, m, &mut rng)?,
        CodebookInit::RandomSample => random_distinct(n, m, &mut rng),
    };
    let mut centers: Vec<WordPoint> = seeds.iter().map(|&i| points[i].clone()).collect();

    let mut objective = Vec::new();
    let mut assignments = vec![0usize; n];
    let mut prev_assignments: Option<Vec<usize>> = None;

    for _iter in 0..max_iter {
        // Assignment step.
        let nearest: Vec<(usize, f64)> = points
            .par_iter()
            .map(|p| {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = word_point_distance(center, p)?;
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                Ok((best, best_d))
            })
            .collect::<Result<_>>()?;
        let mut dist = vec![0.0; n];
        for (i, &(c, d)) in nearest.iter().enumerate() {
            assignments[i] = c;
            dist[i] = d;
        }

        // Empty-cluster repair: promote the globally farthest word.
        let mut counts = vec![0usize; m];
        for &a in &assignments {
            counts[a] += 1;
        }
        loop {
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let mut far = 0usize;
            for i in 1..n {
                if dist[i] > dist[far] {
                    far = i;
                }
            }
            counts[assignments[far]] -= 1;
            centers[empty] = points[far].clone();
            assignments[far] = empty;
            counts[empty] = 1;
            dist[far] = 0.0;
        }

        objective.push(dist.iter().map(|d| d * d).sum());
        if prev_assignments.as_ref() == Some(&assignments) {
            break;
        }
        prev_assignments = Some(assignments.clone());

        // Center update, guarded so a cluster's cost never increases.
        let clusters: Vec<Vec<usize>> = {
            let mut member_lists = vec![Vec::new(); m];
            for (i, &a) in assignments.iter().enumerate() {
                member_lists[a].push(i);
            }
            member_lists
        };
        let updated: Vec<Option<WordPoint>> = clusters
            .par_iter()
            .enumerate()
            .map(|(c, members)| {
                let cluster_points: Vec<&WordPoint> =
                    members.iter().map(|&i| points[i]).collect();
                let old_cost = cluster_cost(&centers[c], &cluster_points)?;
                let candidate = match &centers[c] {
                    WordPoint::Spd(x) => {
                        let spds: Vec<&SymPosDef> = cluster_points
                            .iter()
                            .map(|p| match p {
                                WordPoint::Spd(s) => s,
                                WordPoint::Subspace(_) => unreachable!("same kind"),
                            })
                            .collect();
                        WordPoint::Spd(karcher_iterate_spd(
                            x.clone(),
                            &spds,
                            KARCHER_DEFAULT_MAX_ITER,
                            KARCHER_DEFAULT_TOL,
                        )?)
                    }
                    WordPoint::Subspace(x) => {
                        let subs: Vec<&GrassmannPoint> = cluster_points
                            .iter()
                            .map(|p| match p {
                                WordPoint::Subspace(s) => s,
                                WordPoint::Spd(_) => unreachable!("same kind"),
                            })
                            .collect();
                        let mean = match karcher_iterate_grassmann(
                            x.clone(),
                            &subs,
                            KARCHER_DEFAULT_MAX_ITER,
                            KARCHER_DEFAULT_TOL,
                        ) {
                            Ok(p) => p,
                            Err(Error::CutLocus(_)) => {
                                let restart = extrinsic_mean_grassmann(&subs)?;
                                karcher_iterate_grassmann(
                                    restart,
                                    &subs,
                                    KARCHER_DEFAULT_MAX_ITER,
                                    KARCHER_DEFAULT_TOL,
                                )?
                            }
                            Err(e) => return Err(e),
                        };
                        WordPoint::Subspace(mean)
                    }
                };
                let new_cost = cluster_cost(&candidate, &cluster_points)?;
                Ok(if new_cost <= old_cost {
                    Some(candidate)
                } else {
                    None
                })
            })
            .collect::<Result<_>>()?;
        for (c, candidate) in updated.into_iter().enumerate() {
            if let Some(p) = candidate {
                centers[c] = p;
            }
        }
    }

    let codebook = KarcherCodebook::from_parts(kind, centers)?;
    Ok(KKarcherFit {
        codebook,
        objective,
        assignments,
    })
}

fn cluster_cost(center: &WordPoint, members: &[&WordPoint]) -> Result<f64> {
    let mut acc = 0.0;
    for p in members {
        let d = word_point_distance(center, p)?;
        acc += d * d;
    }
    Ok(acc)
}

/// Embed same-kind words into their Euclidean image: projection-matrix
/// half-vectorization for subspaces, identity-tangent half-vectorization for
/// SPD payloads.
pub fn embed_words(words: &[MidLevelWord]) -> Result<Vec<DVector<f64>>> {
    if words.is_empty() {
        return Err(Error::Empty("no words to embed".into()));
    }
    let kind = words[0].kind();
    if words.iter().any(|w| w.kind() != kind) {
        return Err(Error::KindMismatch("words are not all of one kind".into()));
    }
    let points: Vec<&WordPoint> = words.iter().map(|w| w.point()).collect();
    check_same_shape(&points)?;
    points
        .par_iter()
        .map(|p| embed_word_point(p))
        .collect::<Result<_>>()
}

pub(crate) fn embed_word_point(point: &WordPoint) -> Result<DVector<f64>> {
    match point {
        WordPoint::Subspace(u) => Ok(embed_grassmann(u)),
        WordPoint::Spd(c) => embed_spd(c),
    }
}

/// A Gaussian mixture over PCA-projected word embeddings, with diagonal
/// covariances. The projection is part of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannianGmm {
    kind: WordKind,
    pca: PcaProjection,
    weights: DVector<f64>,
    /// Component means as rows of an M×D matrix.
    means: DMatrix<f64>,
    /// Per-component, per-dimension variances, M×D.
    variances: DMatrix<f64>,
}

impl RiemannianGmm {
    pub fn from_parts(
        kind: WordKind,
        pca: PcaProjection,
        weights: DVector<f64>,
        means: DMatrix<f64>,
        variances: DMatrix<f64>,
    ) -> Result<Self> {
        let m = weights.len();
        let d = pca.output_dim();
        if m == 0 || means.nrows() != m || variances.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent component counts: {m} weights, {} means, {} variances",
                means.nrows(),
                variances.nrows()
            )));
        }
        if means.ncols() != d || variances.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "component dimension {} does not match the projection output {d}",
                means.ncols()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Degenerate("component weights must be positive".into()));
        }
        if (weights.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {} instead of 1",
                weights.sum()
            )));
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Degenerate("variances must be positive".into()));
        }
        Ok(Self {
            kind,
            pca,
            weights,
            means,
            variances,
        })
    }

    pub fn kind(&self) -> WordKind {
        self.kind
    }

    pub fn pca(&self) -> &PcaProjection {
        &self.pca
    }

    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    /// Dimension of the projected space the mixture lives in.
    pub fn projected_dim(&self) -> usize {
        self.pca.output_dim()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn variances(&self) -> &DMatrix<f64> {
        &self.variances
    }

    /// Embed and project a batch of words into the mixture's space.
    pub fn project_words(&self, words: &[MidLevelWord]) -> Result<Vec<DVector<f64>>> {
        if words.iter().any(|w| w.kind() != self.kind) {
            return Err(Error::KindMismatch(format!(
                "model was fitted on {} words",
                self.kind
            )));
        }
        let embedded = embed_words(words)?;
        embedded.iter().map(|e| self.pca.project(e)).collect()
    }

    pub(crate) fn log_weighted_densities_into(&self, phi: &DVector<f64>, out: &mut [f64]) {
        let d = self.projected_dim();
        for m in 0..self.component_count() {
            let mut acc = self.weights[m].ln();
            for j in 0..d {
                let var = self.variances[(m, j)];
                let diff = phi[j] - self.means[(m, j)];
                acc -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var);
            }
            out[m] = acc;
        }
    }

    /// Posterior responsibilities γ(m) of a projected word; they sum to 1.
    pub fn posteriors(&self, phi: &DVector<f64>) -> Result<DVector<f64>> {
        if phi.len() != self.projected_dim() {
            return Err(Error::DimensionMismatch(format!(
                "projected word of length {} for a mixture over R^{}",
                phi.len(),
                self.projected_dim()
            )));
        }
        let m = self.component_count();
        let mut logp = vec![0.0; m];
        self.log_weighted_densities_into(phi, &mut logp);
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logp.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        Ok(DVector::from_fn(m, |i, _| (logp[i] - lse).exp()))
    }
}

/// Result of [`fit_riemannian_gmm`]: model plus log-likelihood trace.
#[derive(Debug, Clone)]
pub struct RiemannianGmmFit {
    pub model: RiemannianGmm,
    pub log_likelihood: Vec<f64>,
}

struct DiagPartial {
    log_likelihood: f64,
    counts: DVector<f64>,
    sum: DMatrix<f64>,
    sum_sq: DMatrix<f64>,
}

/// Fit the embedding-space Gaussian mixture: embed words, reduce to D
/// dimensions with PCA (fitted here and stored in the model), then run
/// diagonal-covariance EM from a seeded k-means++ initialization.
pub fn fit_riemannian_gmm(
    words: &[MidLevelWord],
    m: usize,
    d_out: usize,
    seed: u64,
) -> Result<RiemannianGmmFit> {
    if m == 0 {
        return Err(Error::InvalidInput("component count must be positive".into()));
    }
    if words.len() < 10 * m {
        return Err(Error::TooFewSamples(format!(
            "{} words for {m} components; need at least {}",
            words.len(),
            10 * m
        )));
    }
    let kind = words[0].kind();
    let embedded = embed_words(words)?;
    let edim = embedded[0].len();
    if d_out > edim {
        return Err(Error::DimensionMismatch(format!(
            "projection dimension {d_out} exceeds the embedding dimension {edim}"
        )));
    }
    let n = embedded.len();
    let mut rows = DMatrix::zeros(n, edim);
    for (i, e) in embedded.iter().enumerate() {
        rows.set_row(i, &e.transpose());
    }
    let pca = fit_pca(&rows, d_out)?;
    let projected = pca.project_rows(&rows)?;

    // Per-dimension variance of the projected data sets the floor. A
    // dimension with no variance at all still gets a positive floor so log
    // densities stay finite.
    let col_var = {
        let mean = projected.row_mean();
        let mut acc = DVector::zeros(d_out);
        for row in projected.row_iter() {
            let diff = row - &mean;
            for j in 0..d_out {
                acc[j] += diff[j] * diff[j];
            }
        }
        acc / n as f64
    };
    let total_var = col_var.mean();
    if total_var <= 0.0 {
        return Err(Error::Degenerate(
            "projected word embeddings have zero variance".into(),
        ));
    }
    let floor = DVector::from_fn(d_out, |j, _| {
        VARIANCE_FLOOR_RATIO * col_var[j].max(VARIANCE_FLOOR_RATIO * total_var)
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = crate::alignment::kmeans_pp_rows(&projected, m, &mut rng);
    let mut weights = DVector::from_element(m, 1.0 / m as f64);
    let mut means = DMatrix::from_fn(m, d_out, |i, j| projected[(seeds[i], j)]);
    let mut variances = DMatrix::from_fn(m, d_out, |_, j| col_var[j].max(floor[j]));

    let mut trace = Vec::new();
    for _iter in 0..EM_MAX_ITER {
        let model = RiemannianGmm {
            kind,
            pca: pca.clone(),
            weights: weights.clone(),
            means: means.clone(),
            variances: variances.clone(),
        };
        let chunk_starts: Vec<usize> = (0..n).step_by(EM_CHUNK).collect();
        let partials: Vec<DiagPartial> = chunk_starts
            .par_iter()
            .map(|&start| {
                let end = (start + EM_CHUNK).min(n);
                let mut part = DiagPartial {
                    log_likelihood: 0.0,
                    counts: DVector::zeros(m),
                    sum: DMatrix::zeros(m, d_out),
                    sum_sq: DMatrix::zeros(m, d_out),
                };
                let mut logp = vec![0.0; m];
                for i in start..end {
                    let phi = projected.row(i).transpose();
                    model.log_weighted_densities_into(&phi, &mut logp);
                    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + logp.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                    part.log_likelihood += lse;
                    for c in 0..m {
                        let resp = (logp[c] - lse).exp();
                        part.counts[c] += resp;
                        for j in 0..d_out {
                            part.sum[(c, j)] += resp * phi[j];
                            part.sum_sq[(c, j)] += resp * phi[j] * phi[j];
                        }
                    }
                }
                part
            })
            .collect();

        let mut ll = 0.0;
        let mut counts = DVector::zeros(m);
        let mut sum = DMatrix::zeros(m, d_out);
        let mut sum_sq = DMatrix::zeros(m, d_out);
        for p in partials {
            ll += p.log_likelihood;
            counts += p.counts;
            sum += p.sum;
            sum_sq += p.sum_sq;
        }

        if let Some(&prev) = trace.last() {
            debug_assert!(
                ll >= prev - 1e-8 * (1.0 + f64::abs(prev)),
                "EM log-likelihood decreased: {prev} -> {ll}"
            );
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev) / prev.abs().max(1e-300) < EM_REL_TOL);
        trace.push(ll);
        if converged {
            break;
        }

        for c in 0..m {
            let nk = counts[c];
            weights[c] = nk / n as f64;
            if nk > 0.0 {
                for j in 0..d_out {
                    let mu = sum[(c, j)] / nk;
                    means[(c, j)] = mu;
                    let var = sum_sq[(c, j)] / nk - mu * mu;
                    variances[(c, j)] = var.max(floor[j]);
                }
            } else {
                for j in 0..d_out {
                    variances[(c, j)] = floor[j];
                }
            }
        }
    }

    let model = RiemannianGmm::from_parts(kind, pca, weights, means, variances)?;
    Ok(RiemannianGmmFit {
        model,
        log_likelihood: trace,
    })
}
