//! Mid-level word models: each aligned feature group becomes a point on a
//! manifold — the span of its leading principal directions (Grassmann), its
//! regularized sample covariance (SPD), or a Gaussian embedded as an SPD
//! matrix of unit determinant.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::alignment::FeatureGroup;
use crate::error::{Error, Result};
use crate::linalg::{fix_column_signs, sorted_symmetric_eigen};
use crate::manifold::{GrassmannPoint, SymPosDef};

/// Relative covariance regularization: ε of the mean eigenvalue is added to
/// the diagonal.
const COV_EPSILON: f64 = 1e-4;
/// Absolute fallback for groups with zero scatter.
const CONSTANT_GROUP_EPSILON: f64 = 1e-8;
/// Scatter eigenvalues at or below this fraction of the largest do not count
/// toward the rank of a group.
const RANK_TOL: f64 = 1e-10;
/// Accepted deviation of a Gaussian word's determinant from 1.
const UNIT_DET_TOL: f64 = 1e-6;

/// Which statistical model produced a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordKind {
    Subspace,
    Covariance,
    GaussianSpd,
}

impl WordKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WordKind::Subspace => "subspace",
            WordKind::Covariance => "covariance",
            WordKind::GaussianSpd => "gaussian-spd",
        }
    }
}

impl std::fmt::Display for WordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The manifold payload of a word.
#[derive(Debug, Clone, PartialEq)]
pub enum WordPoint {
    Subspace(GrassmannPoint),
    Spd(SymPosDef),
}

/// A mid-level word: one manifold point per (video, mixture component) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MidLevelWord {
    kind: WordKind,
    point: WordPoint,
    video_id: String,
    component_index: usize,
}

impl MidLevelWord {
    pub fn new(
        kind: WordKind,
        point: WordPoint,
        video_id: impl Into<String>,
        component_index: usize,
    ) -> Result<Self> {
        match (&kind, &point) {
            (WordKind::Subspace, WordPoint::Subspace(_)) => {}
            (WordKind::Covariance, WordPoint::Spd(_)) => {}
            (WordKind::GaussianSpd, WordPoint::Spd(spd)) => {
                let det = spd_determinant(spd);
                if (det - 1.0).abs() > UNIT_DET_TOL {
                    return Err(Error::InvalidInput(format!(
                        "Gaussian word determinant {det} is not 1"
                    )));
                }
            }
            _ => {
                return Err(Error::KindMismatch(format!(
                    "kind {kind} does not match the payload type"
                )));
            }
        }
        Ok(Self {
            kind,
            point,
            video_id: video_id.into(),
            component_index,
        })
    }

    pub fn kind(&self) -> WordKind {
        self.kind
    }

    pub fn point(&self) -> &WordPoint {
        &self.point
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn component_index(&self) -> usize {
        self.component_index
    }

    pub fn as_grassmann(&self) -> Option<&GrassmannPoint> {
        match &self.point {
            WordPoint::Subspace(p) => Some(p),
            WordPoint::Spd(_) => None,
        }
    }

    pub fn as_spd(&self) -> Option<&SymPosDef> {
        match &self.point {
            WordPoint::Spd(p) => Some(p),
            WordPoint::Subspace(_) => None,
        }
    }
}

fn spd_determinant(spd: &SymPosDef) -> f64 {
    // Product of squared Cholesky diagonal entries, accumulated in log space.
    let chol = Cholesky::new(spd.matrix().clone()).expect("validated SPD");
    let logdet: f64 = chol.l().diagonal().iter().map(|&v| v.ln()).sum::<f64>() * 2.0;
    logdet.exp()
}

fn group_mean(group: &FeatureGroup) -> DVector<f64> {
    group.members().row_mean().transpose()
}

fn centered_members(group: &FeatureGroup, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut centered = group.members().clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    centered
}

/// Model a group as the span of the r leading eigenvectors of its scatter
/// matrix.
pub fn model_subspace(group: &FeatureGroup, r: usize) -> Result<MidLevelWord> {
    let (t, d) = (group.group_size(), group.dim());
    if r == 0 || r >= d.min(t) {
        return Err(Error::InvalidInput(format!(
            "subspace dimension {r} must satisfy 0 < r < min(dim {d}, group size {t})"
        )));
    }
    let mean = group_mean(group);
    let centered = centered_members(group, &mean);
    let scatter = centered.transpose() * &centered;
    let eig = sorted_symmetric_eigen(&scatter);
    let leading = eig.values[0];
    let rank = eig.values.iter().filter(|&&v| v > RANK_TOL * leading.max(0.0)).count();
    if leading <= 0.0 || rank < r {
        return Err(Error::RankDeficient(format!(
            "group of video {} has rank {rank}, need {r}",
            group.video_id()
        )));
    }
    let mut basis = eig.vectors.columns(0, r).into_owned();
    fix_column_signs(&mut basis);
    MidLevelWord::new(
        WordKind::Subspace,
        WordPoint::Subspace(GrassmannPoint::new(basis)?),
        group.video_id(),
        group.component_index(),
    )
}

/// Sample covariance of the group with a scaled-identity regularizer:
/// C + ε·(tr C / d)·I, or ε'·I when the scatter is identically zero.
fn regularized_covariance(group: &FeatureGroup) -> Result<(DVector<f64>, SymPosDef)> {
    let (t, d) = (group.group_size(), group.dim());
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "covariance needs at least 2 members, group has {t}"
        )));
    }
    let mean = group_mean(group);
    let centered = centered_members(group, &mean);
    let mut cov = centered.transpose() * &centered / (t as f64 - 1.0);
    let trace = cov.trace();
    if trace > 0.0 {
        let ridge = COV_EPSILON * trace / d as f64;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
    } else {
        cov = DMatrix::identity(d, d) * CONSTANT_GROUP_EPSILON;
    }
    Ok((mean, SymPosDef::new(cov)?))
}

/// Model a group by its regularized sample covariance matrix.
pub fn model_covariance(group: &FeatureGroup) -> Result<MidLevelWord> {
    let (_, cov) = regularized_covariance(group)?;
    MidLevelWord::new(
        WordKind::Covariance,
        WordPoint::Spd(cov),
        group.video_id(),
        group.component_index(),
    )
}

/// Embed a Gaussian N(μ, Σ) as the unit-determinant SPD matrix
/// |Σ|^{−1/(d+1)}·[[Σ+μμᵀ, μ], [μᵀ, 1]].
pub fn gaussian_to_spd(mu: &DVector<f64>, sigma: &SymPosDef) -> Result<SymPosDef> {
    let d = sigma.dim();
    if mu.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "mean of length {} with a {d}×{d} covariance",
            mu.len()
        )));
    }
    let chol = Cholesky::new(sigma.matrix().clone()).expect("validated SPD");
    let logdet: f64 = chol.l().diagonal().iter().map(|&v| v.ln()).sum::<f64>() * 2.0;
    let scale = (-logdet / (d as f64 + 1.0)).exp();
    let mut g = DMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = scale * (sigma.matrix()[(i, j)] + mu[i] * mu[j]);
        }
        g[(i, d)] = scale * mu[i];
        g[(d, i)] = scale * mu[i];
    }
    g[(d, d)] = scale;
    SymPosDef::new(g)
}

/// Model a group by the Gaussian of its mean and regularized covariance,
/// embedded as a unit-determinant SPD matrix.
pub fn model_gaussian_spd(group: &FeatureGroup) -> Result<MidLevelWord> {
    let (mean, cov) = regularized_covariance(group)?;
    MidLevelWord::new(
        WordKind::GaussianSpd,
        WordPoint::Spd(gaussian_to_spd(&mean, &cov)?),
        group.video_id(),
        group.component_index(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::grassmann_geodesic_dist;
    use crate::testutil::{random_spd, random_vector};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn group_from_rows(rows: DMatrix<f64>) -> FeatureGroup {
        let t = rows.nrows();
        FeatureGroup::new("v", 0, rows, DVector::from_fn(t, |i, _| 1.0 / (i + 1) as f64))
            .unwrap()
    }

    fn permuted(group: &FeatureGroup, perm: &[usize]) -> FeatureGroup {
        let m = group.members();
        let rows = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], j)]);
        let probs = DVector::from_element(m.nrows(), 1.0);
        FeatureGroup::new(group.video_id(), group.component_index(), rows, probs).unwrap()
    }

    #[test]
    fn subspace_of_planar_data_spans_the_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let t = 12;
        let mut rows = DMatrix::zeros(t, 4);
        for i in 0..t {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            // Affine plane spanned by e1+e2 and e4, offset by e3.
            rows[(i, 0)] = a;
            rows[(i, 1)] = a;
            rows[(i, 2)] = 3.0;
            rows[(i, 3)] = b;
        }
        let word = model_subspace(&group_from_rows(rows.clone()), 2).unwrap();
        let basis = word.as_grassmann().unwrap().basis();
        let mean = rows.row_mean();
        for i in 0..t {
            let centered = (rows.row(i) - &mean).transpose();
            let residual = &centered - basis * (basis.transpose() * &centered);
            assert!(residual.norm() < 1e-8);
        }
    }

    #[test]
    fn line_through_origin_yields_its_direction() {
        let dir = DVector::from_vec(vec![0.6, -0.8, 0.0]);
        let rows = DMatrix::from_fn(6, 3, |i, j| (i as f64 - 2.5) * dir[j]);
        let word = model_subspace(&group_from_rows(rows), 1).unwrap();
        let basis = word.as_grassmann().unwrap().basis();
        let dot = (basis.transpose() * &dir)[(0, 0)].abs();
        assert_relative_eq!(dot, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn scatter_eigenvectors_agree_with_svd_of_centered_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows = DMatrix::from_fn(10, 5, |_, _| rng.random_range(-1.0..1.0));
        let word = model_subspace(&group_from_rows(rows.clone()), 3).unwrap();

        // Independent path: left singular vectors of the centered transpose.
        let mean = rows.row_mean();
        let mut centered = rows.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        let svd = centered.transpose().svd(true, false);
        let u = svd.u.unwrap();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap()
        });
        let mut top = DMatrix::zeros(5, 3);
        for (dst, &src) in order.iter().take(3).enumerate() {
            top.set_column(dst, &u.column(src));
        }
        let oracle = GrassmannPoint::new(top).unwrap();
        let dist = grassmann_geodesic_dist(word.as_grassmann().unwrap(), &oracle).unwrap();
        assert!(dist < 1e-8, "subspaces differ by {dist}");
    }

    #[test]
    fn subspace_is_invariant_to_rotation_within_its_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let t = 8;
        let mut rows = DMatrix::zeros(t, 4);
        let coeffs: Vec<(f64, f64)> = (0..t)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        for (i, &(a, b)) in coeffs.iter().enumerate() {
            rows[(i, 0)] = a;
            rows[(i, 2)] = b;
        }
        let alpha = 0.7_f64;
        let mut rotated = DMatrix::zeros(t, 4);
        for (i, &(a, b)) in coeffs.iter().enumerate() {
            rotated[(i, 0)] = alpha.cos() * a - alpha.sin() * b;
            rotated[(i, 2)] = alpha.sin() * a + alpha.cos() * b;
        }
        let w1 = model_subspace(&group_from_rows(rows), 2).unwrap();
        let w2 = model_subspace(&group_from_rows(rotated), 2).unwrap();
        let dist = grassmann_geodesic_dist(
            w1.as_grassmann().unwrap(),
            w2.as_grassmann().unwrap(),
        )
        .unwrap();
        assert!(dist < 1e-8);
    }

    #[test]
    fn rank_deficient_groups_are_rejected() {
        let rows = DMatrix::from_fn(6, 4, |i, j| if j == 0 { i as f64 } else { 0.0 });
        assert!(matches!(
            model_subspace(&group_from_rows(rows), 2),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn subspace_dimension_is_validated() {
        let rows = DMatrix::zeros(3, 5);
        assert!(model_subspace(&group_from_rows(rows.clone()), 3).is_err());
        assert!(model_subspace(&group_from_rows(rows), 0).is_err());
    }

    #[test]
    fn covariance_matches_hand_computation() {
        let rows = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let word = model_covariance(&group_from_rows(rows)).unwrap();
        let c = word.as_spd().unwrap().matrix();
        assert_relative_eq!(c[(0, 0)], 2.0 + 1e-4, max_relative = 1e-12);
        assert_relative_eq!(c[(1, 1)], 1e-4, max_relative = 1e-12);
        assert_eq!(c[(0, 1)], 0.0);
    }

    #[test]
    fn constant_group_falls_back_to_scaled_identity() {
        let rows = DMatrix::from_element(5, 3, 2.5);
        let word = model_covariance(&group_from_rows(rows)).unwrap();
        let c = word.as_spd().unwrap().matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1e-8 } else { 0.0 };
                assert_eq!(c[(i, j)], expected);
            }
        }
    }

    #[test]
    fn covariance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let t = 9;
        let d = 4;
        let rows = DMatrix::from_fn(t, d, |_, _| rng.random_range(-2.0..2.0));
        let word = model_covariance(&group_from_rows(rows.clone())).unwrap();

        // Textbook two-pass estimate with explicit loops.
        let mut mean = vec![0.0; d];
        for i in 0..t {
            for j in 0..d {
                mean[j] += rows[(i, j)] / t as f64;
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..t {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] +=
                        (rows[(i, a)] - mean[a]) * (rows[(i, b)] - mean[b]) / (t as f64 - 1.0);
                }
            }
        }
        let ridge = 1e-4 * cov.trace() / d as f64;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        assert_relative_eq!(
            word.as_spd().unwrap().matrix(),
            &cov,
            epsilon = 1e-12,
            max_relative = 1e-10
        );
    }

    #[test]
    fn covariance_needs_two_members() {
        let rows = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(model_covariance(&group_from_rows(rows)).is_err());
    }

    #[test]
    fn standard_gaussian_embeds_to_identity() {
        let g = gaussian_to_spd(&DVector::zeros(3), &SymPosDef::identity(3)).unwrap();
        assert_relative_eq!(
            g.matrix(),
            &DMatrix::identity(4, 4),
            epsilon = 1e-12
        );
    }

    #[test]
    fn scalar_gaussian_matches_hand_computation() {
        let g = gaussian_to_spd(
            &DVector::from_vec(vec![1.0]),
            &SymPosDef::new(DMatrix::from_element(1, 1, 1.0)).unwrap(),
        )
        .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        assert_relative_eq!(g.matrix(), &expected, max_relative = 1e-12);
        assert_relative_eq!(spd_determinant(&g), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn gaussian_embedding_has_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for &d in &[2usize, 8] {
            for _ in 0..25 {
                let sigma = random_spd(d, &mut rng);
                let mu = random_vector(d, &mut rng) * 2.0;
                let g = gaussian_to_spd(&mu, &sigma).unwrap();
                assert_relative_eq!(spd_determinant(&g), 1.0, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn all_models_ignore_member_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let rows = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        let group = group_from_rows(rows);
        let perm = vec![4, 0, 6, 2, 5, 1, 3];
        let shuffled = permuted(&group, &perm);

        let s1 = model_subspace(&group, 2).unwrap();
        let s2 = model_subspace(&shuffled, 2).unwrap();
        // The acos-based metric cannot resolve angles much below 1e-8.
        assert!(
            grassmann_geodesic_dist(s1.as_grassmann().unwrap(), s2.as_grassmann().unwrap())
                .unwrap()
                < 1e-7
        );

        let c1 = model_covariance(&group).unwrap();
        let c2 = model_covariance(&shuffled).unwrap();
        assert_relative_eq!(
            c1.as_spd().unwrap().matrix(),
            c2.as_spd().unwrap().matrix(),
            epsilon = 1e-12
        );

        let g1 = model_gaussian_spd(&group).unwrap();
        let g2 = model_gaussian_spd(&shuffled).unwrap();
        assert_relative_eq!(
            g1.as_spd().unwrap().matrix(),
            g2.as_spd().unwrap().matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn word_constructor_rejects_mismatched_kinds() {
        let spd = SymPosDef::identity(2);
        assert!(matches!(
            MidLevelWord::new(WordKind::Subspace, WordPoint::Spd(spd), "v", 0),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn word_constructor_enforces_unit_determinant_for_gaussian_words() {
        let spd = SymPosDef::new(DMatrix::identity(3, 3) * 2.0).unwrap();
        assert!(
            MidLevelWord::new(WordKind::GaussianSpd, WordPoint::Spd(spd), "v", 0).is_err()
        );
    }
}
