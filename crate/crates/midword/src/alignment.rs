//! Global alignment stage: a universal spherical Gaussian mixture fitted on
//! pooled descriptors, and the per-video decomposition into K top-T feature
//! groups, one per mixture component. A PCA projection for descriptor
//! dimensionality reduction lives here too since it is fitted on the same
//! pooled data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, fix_column_signs, sorted_symmetric_eigen};

/// Samples per chunk in the parallel E-step. Partial sums are reduced in
/// chunk order, so results do not depend on the worker count.
const EM_CHUNK: usize = 1024;

const EM_MAX_ITER: usize = 200;
const EM_REL_TOL: f64 = 1e-5;
/// Spherical variances never drop below this fraction of the pooled data
/// variance.
const VARIANCE_FLOOR_RATIO: f64 = 1e-6;

/// One video's set of local descriptors, stored row-major (L×d).
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    video_id: String,
    features: DMatrix<f64>,
}

impl DescriptorSet {
    pub fn new(video_id: impl Into<String>, features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Empty(format!(
                "descriptor set needs at least one feature of positive dimension, got {}×{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if !all_finite(&features) {
            return Err(Error::InvalidInput(
                "descriptor set has non-finite entries".into(),
            ));
        }
        Ok(Self {
            video_id: video_id.into(),
            features,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Features as rows of an L×d matrix.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }
}

/// Affine projection onto the leading principal directions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    mean: DVector<f64>,
    rows: DMatrix<f64>,
}

impl PcaProjection {
    pub fn from_parts(mean: DVector<f64>, rows: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "projection rows of width {} vs mean of length {}",
                rows.ncols(),
                mean.len()
            )));
        }
        if rows.nrows() == 0 || rows.nrows() > rows.ncols() {
            return Err(Error::InvalidInput(format!(
                "projection must map down: {}×{}",
                rows.nrows(),
                rows.ncols()
            )));
        }
        if !all_finite(&rows) || !mean.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("projection has non-finite entries".into()));
        }
        let gram = &rows * rows.transpose();
        let defect = crate::linalg::max_abs(&(gram - DMatrix::identity(rows.nrows(), rows.nrows())));
        if defect > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "projection rows are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self { mean, rows })
    }

    /// The identity map on R^dim, with zero mean. Handy as a no-op stand-in
    /// where a projection is required.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            rows: DMatrix::identity(dim, dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.rows.nrows()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} into a projection expecting {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(&self.rows * (x - &self.mean))
    }

    /// Project every row of an n×input matrix, yielding n×output.
    pub fn project_rows(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "rows of width {} into a projection expecting {}",
                samples.ncols(),
                self.input_dim()
            )));
        }
        let mut centered = samples.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.rows.transpose())
    }
}

/// Fit a PCA projection on the rows of `samples`.
///
/// Principal directions come from the sample covariance of the centered
/// data; each row's sign is fixed so its largest-magnitude entry is
/// positive, making the output deterministic.
pub fn fit_pca(samples: &DMatrix<f64>, output_dim: usize) -> Result<PcaProjection> {
    let (n, d) = (samples.nrows(), samples.ncols());
    if output_dim == 0 {
        return Err(Error::InvalidInput("output_dim must be positive".into()));
    }
    if output_dim > d {
        return Err(Error::DimensionMismatch(format!(
            "output_dim {output_dim} exceeds input dimension {d}"
        )));
    }
    if n < output_dim {
        return Err(Error::TooFewSamples(format!(
            "{n} samples cannot determine {output_dim} principal directions"
        )));
    }
    if !all_finite(samples) {
        return Err(Error::InvalidInput("samples have non-finite entries".into()));
    }
    let mean = samples.row_mean().transpose();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = centered.transpose() * &centered / denom;
    let eig = sorted_symmetric_eigen(&cov);
    let mut dirs = eig.vectors.columns(0, output_dim).into_owned();
    fix_column_signs(&mut dirs);
    PcaProjection::from_parts(mean, dirs.transpose())
}

/// Universal mixture of spherical Gaussians over pooled descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGmm {
    weights: DVector<f64>,
    /// Component means as rows of a K×d matrix.
    means: DMatrix<f64>,
    variances: DVector<f64>,
}

impl SphericalGmm {
    pub fn from_parts(
        weights: DVector<f64>,
        means: DMatrix<f64>,
        variances: DVector<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.nrows() != k || variances.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent component counts: {} weights, {} means, {} variances",
                k,
                means.nrows(),
                variances.len()
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
            return Err(Error::Degenerate("component variances must be positive".into()));
        }
        if !all_finite(&means) {
            return Err(Error::InvalidInput("means have non-finite entries".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Component means as rows of a K×d matrix.
    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }

    fn log_weighted_density_into(&self, f: &DVector<f64>, out: &mut [f64]) {
        let d = self.dim() as f64;
        for k in 0..self.component_count() {
            let diff2: f64 = (0..self.dim())
                .map(|j| {
                    let t = f[j] - self.means[(k, j)];
                    t * t
                })
                .sum();
            let var = self.variances[k];
            out[k] = self.weights[k].ln()
                - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln()
                - diff2 / (2.0 * var);
        }
    }
}

/// Result of [`fit_spherical_gmm`]: the model plus the log-likelihood trace,
/// one entry per EM iteration.
#[derive(Debug, Clone)]
pub struct SphericalGmmFit {
    pub model: SphericalGmm,
    pub log_likelihood: Vec<f64>,
}

/// Pooled per-dimension variance, averaged over dimensions (maximum
/// likelihood normalization).
fn mean_dimension_variance(samples: &DMatrix<f64>) -> f64 {
    let n = samples.nrows() as f64;
    let mean = samples.row_mean();
    let mut acc = 0.0;
    for row in samples.row_iter() {
        let diff = row - &mean;
        acc += diff.norm_squared();
    }
    acc / (n * samples.ncols() as f64)
}

/// k-means++ seeding over Euclidean distance: indices of K rows.
pub(crate) fn kmeans_pp_rows(
    samples: &DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = samples.nrows();
    let mut chosen = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    chosen.push(first);
    let mut d2: Vec<f64> = (0..n)
        .map(|i| (samples.row(i) - samples.row(first)).norm_squared())
        .collect();
    while chosen.len() < k {
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
            // All remaining mass sits on already-chosen points; take the
            // lowest unchosen index so seeds stay distinct while k <= n.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            let dist = (samples.row(i) - samples.row(next)).norm_squared();
            if dist < d2[i] {
                d2[i] = dist;
            }
        }
    }
    chosen
}

struct EStepPartial {
    log_likelihood: f64,
    counts: DVector<f64>,
    weighted_sum: DMatrix<f64>,
    weighted_norm2: DVector<f64>,
}

/// Fit a spherical GMM with EM from a seeded k-means++ initialization.
///
/// The log-likelihood is non-decreasing across iterations; fitting stops at
/// a relative gain below 1e−5 or after 200 iterations.
pub fn fit_spherical_gmm(samples: &DMatrix<f64>, k: usize, seed: u64) -> Result<SphericalGmmFit> {
    let (n, d) = (samples.nrows(), samples.ncols());
    if k == 0 {
        return Err(Error::InvalidInput("component count must be positive".into()));
    }
    if n < 10 * k {
        return Err(Error::TooFewSamples(format!(
            "{n} samples for {k} components; need at least {}",
            10 * k
        )));
    }
    if !all_finite(samples) {
        return Err(Error::InvalidInput("samples have non-finite entries".into()));
    }
    let data_variance = mean_dimension_variance(samples);
    if data_variance <= 0.0 {
        return Err(Error::Degenerate(
            "pooled descriptor variance is zero".into(),
        ));
    }
    let floor = VARIANCE_FLOOR_RATIO * data_variance;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeans_pp_rows(samples, k, &mut rng);
    let mut weights = DVector::from_element(k, 1.0 / k as f64);
    let mut means = DMatrix::from_fn(k, d, |i, j| samples[(seeds[i], j)]);
    let mut variances = DVector::from_element(k, data_variance.max(floor));

    let mut trace = Vec::new();
    for _iter in 0..EM_MAX_ITER {
        let model = SphericalGmm {
            weights: weights.clone(),
            means: means.clone(),
            variances: variances.clone(),
        };
        let chunk_starts: Vec<usize> = (0..n).step_by(EM_CHUNK).collect();
        let partials: Vec<EStepPartial> = chunk_starts
            .par_iter()
            .map(|&start| {
                let end = (start + EM_CHUNK).min(n);
                let mut part = EStepPartial {
                    log_likelihood: 0.0,
                    counts: DVector::zeros(k),
                    weighted_sum: DMatrix::zeros(k, d),
                    weighted_norm2: DVector::zeros(k),
                };
                let mut logp = vec![0.0_f64; k];
                for i in start..end {
                    let f = samples.row(i).transpose();
                    model.log_weighted_density_into(&f, &mut logp);
                    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + logp.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                    part.log_likelihood += lse;
                    let norm2 = f.norm_squared();
                    for c in 0..k {
                        let resp = (logp[c] - lse).exp();
                        part.counts[c] += resp;
                        part.weighted_norm2[c] += resp * norm2;
                        for j in 0..d {
                            part.weighted_sum[(c, j)] += resp * f[j];
                        }
                    }
                }
                part
            })
            .collect();

        let mut ll = 0.0;
        let mut counts = DVector::zeros(k);
        let mut weighted_sum = DMatrix::zeros(k, d);
        let mut weighted_norm2 = DVector::zeros(k);
        for p in partials {
            ll += p.log_likelihood;
            counts += p.counts;
            weighted_sum += p.weighted_sum;
            weighted_norm2 += p.weighted_norm2;
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

        for c in 0..k {
            let nk = counts[c];
            weights[c] = nk / n as f64;
            if nk > 0.0 {
                let mut mean_norm2 = 0.0;
                for j in 0..d {
                    let m = weighted_sum[(c, j)] / nk;
                    means[(c, j)] = m;
                    mean_norm2 += m * m;
                }
                let var = (weighted_norm2[c] / nk - mean_norm2) / d as f64;
                variances[c] = var.max(floor);
            } else {
                variances[c] = floor;
            }
        }
    }

    let model = SphericalGmm::from_parts(weights, means, variances)?;
    Ok(SphericalGmmFit {
        model,
        log_likelihood: trace,
    })
}

/// Unnormalized weighted densities p_k(f) = w_k·G(f | μ_k, σ_k²I), one per
/// component, evaluated in log space and exponentiated.
pub fn component_probabilities(gmm: &SphericalGmm, f: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(component_log_probabilities(gmm, f)?.map(f64::exp))
}

/// Natural logs of the values returned by [`component_probabilities`].
/// Rankings should use these to stay meaningful when the densities
/// underflow.
pub fn component_log_probabilities(gmm: &SphericalGmm, f: &DVector<f64>) -> Result<DVector<f64>> {
    if f.len() != gmm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature of length {} against a mixture over R^{}",
            f.len(),
            gmm.dim()
        )));
    }
    let mut out = vec![0.0; gmm.component_count()];
    gmm.log_weighted_density_into(f, &mut out);
    Ok(DVector::from_vec(out))
}

/// One aligned feature group: the T features of a video that score highest
/// under one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    video_id: String,
    component_index: usize,
    /// T×d, rows ordered by descending component probability.
    members: DMatrix<f64>,
    probabilities: DVector<f64>,
}

impl FeatureGroup {
    /// Assemble a group from parts. Rows of `members` must already be in
    /// descending-probability order; [`build_feature_groups`] is the normal
    /// way to obtain groups.
    pub fn new(
        video_id: impl Into<String>,
        component_index: usize,
        members: DMatrix<f64>,
        probabilities: DVector<f64>,
    ) -> Result<Self> {
        if members.nrows() == 0 || members.ncols() == 0 {
            return Err(Error::Empty("feature group has no members".into()));
        }
        if probabilities.len() != members.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {} members",
                probabilities.len(),
                members.nrows()
            )));
        }
        if !all_finite(&members) {
            return Err(Error::InvalidInput("group members have non-finite entries".into()));
        }
        if probabilities.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidInput(
                "member probabilities must be finite and non-negative".into(),
            ));
        }
        if probabilities.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "member probabilities must be sorted descending".into(),
            ));
        }
        Ok(Self {
            video_id: video_id.into(),
            component_index,
            members,
            probabilities,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn component_index(&self) -> usize {
        self.component_index
    }

    pub fn group_size(&self) -> usize {
        self.members.nrows()
    }

    pub fn dim(&self) -> usize {
        self.members.ncols()
    }

    /// Member features as rows, in descending-probability order.
    pub fn members(&self) -> &DMatrix<f64> {
        &self.members
    }

    pub fn probabilities(&self) -> &DVector<f64> {
        &self.probabilities
    }
}

/// Decompose a video into K feature groups, one per mixture component,
/// keeping the T features with the largest p_k. Ties resolve to the lower
/// feature index, so the result is deterministic.
pub fn build_feature_groups(
    gmm: &SphericalGmm,
    video: &DescriptorSet,
    t: usize,
) -> Result<Vec<FeatureGroup>> {
    if video.len() < t {
        return Err(Error::InsufficientFeatures(format!(
            "video {} has {} features, group size is {t}",
            video.video_id(),
            video.len()
        )));
    }
    build_groups_inner(gmm, video, t)
}

/// Like [`build_feature_groups`], but a video with fewer than T features is
/// padded by repeating its highest-probability features instead of failing.
pub fn build_feature_groups_padded(
    gmm: &SphericalGmm,
    video: &DescriptorSet,
    t: usize,
) -> Result<Vec<FeatureGroup>> {
    build_groups_inner(gmm, video, t)
}

fn build_groups_inner(
    gmm: &SphericalGmm,
    video: &DescriptorSet,
    t: usize,
) -> Result<Vec<FeatureGroup>> {
    if t == 0 {
        return Err(Error::InvalidInput("group size must be positive".into()));
    }
    if video.dim() != gmm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "video descriptors of dim {} against a mixture over R^{}",
            video.dim(),
            gmm.dim()
        )));
    }
    let l = video.len();
    let k = gmm.component_count();
    // L×K table of log p_k(f_i).
    let mut scores = DMatrix::zeros(l, k);
    let mut buf = vec![0.0; k];
    for i in 0..l {
        let f = video.feature(i);
        gmm.log_weighted_density_into(&f, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            scores[(i, c)] = v;
        }
    }

    let mut groups = Vec::with_capacity(k);
    for c in 0..k {
        let mut order: Vec<usize> = (0..l).collect();
        order.sort_by(|&a, &b| {
            scores[(b, c)]
                .partial_cmp(&scores[(a, c)])
                .expect("log densities are finite")
                .then(a.cmp(&b))
        });
        let mut members = DMatrix::zeros(t, video.dim());
        let mut probs = DVector::zeros(t);
        for slot in 0..t {
            let src = order[slot % l];
            members.set_row(slot, &video.features().row(src));
            probs[slot] = scores[(src, c)].exp();
        }
        groups.push(FeatureGroup {
            video_id: video.video_id().to_string(),
            component_index: c,
            members,
            probabilities: probs,
        });
    }
    Ok(groups)
}
