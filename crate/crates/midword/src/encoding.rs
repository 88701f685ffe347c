//! Fixed-length video representations built from one video's mid-level
//! words: geodesic bag-of-visual-words, VLAD residual aggregation, and
//! Fisher vectors over the embedding-space mixture.

use nalgebra::{DMatrix, DVector};

use crate::alignment::PcaProjection;
use crate::codebook::{KarcherCodebook, RiemannianGmm, embed_word_point};
use crate::error::{Error, Result};
use crate::words::{MidLevelWord, WordKind};

const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EncodingMethod {
    #[serde(rename = "bovw")]
    Bovw,
    #[serde(rename = "vlad")]
    Vlad,
    #[serde(rename = "fv")]
    FisherVector,
}

impl EncodingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncodingMethod::Bovw => "bovw",
            EncodingMethod::Vlad => "vlad",
            EncodingMethod::FisherVector => "fv",
        }
    }

    /// Output length for a codebook or mixture of `m` components whose
    /// per-component block has `block` entries.
    pub fn vector_len(&self, m: usize, block: usize) -> usize {
        match self {
            EncodingMethod::Bovw | EncodingMethod::Vlad => m * block,
            EncodingMethod::FisherVector => 2 * m * block,
        }
    }
}

impl std::fmt::Display for EncodingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One video's final fixed-length representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVideo {
    video_id: String,
    method: EncodingMethod,
    kind: WordKind,
    /// Number of codebook centers or mixture components (M).
    components: usize,
    /// Entries per component block: the word count for BoVW, the projected
    /// dimension for VLAD and FV.
    block: usize,
    vector: DVector<f64>,
}

impl EncodedVideo {
    pub fn from_parts(
        video_id: impl Into<String>,
        method: EncodingMethod,
        kind: WordKind,
        components: usize,
        block: usize,
        vector: DVector<f64>,
    ) -> Result<Self> {
        let expected = method.vector_len(components, block);
        if vector.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{method} vector has {} entries, expected {expected}",
                vector.len()
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "encoded vector has non-finite entries".into(),
            ));
        }
        if matches!(method, EncodingMethod::Vlad | EncodingMethod::FisherVector) {
            let norm = vector.norm();
            if norm != 0.0 && (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidInput(format!(
                    "{method} vector norm is {norm}, expected 1 or 0"
                )));
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            method,
            kind,
            components,
            block,
            vector,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn method(&self) -> EncodingMethod {
        self.method
    }

    pub fn kind(&self) -> WordKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.vector
    }
}

fn check_video_words(words: &[MidLevelWord], kind: WordKind) -> Result<&str> {
    if words.is_empty() {
        return Err(Error::Empty("a video needs at least one word".into()));
    }
    if let Some(w) = words.iter().find(|w| w.kind() != kind) {
        return Err(Error::KindMismatch(format!(
            "video has a {} word but the model expects {kind}",
            w.kind()
        )));
    }
    Ok(words[0].video_id())
}

/// Geodesic bag-of-visual-words: the M×K matrix of word-to-center
/// distances, each codeword row rescaled to sum to 1, flattened row-major.
/// A row that sums to zero (every word sits on that center) stays zero.
pub fn encode_bovw(
    codebook: &KarcherCodebook,
    words: &[MidLevelWord],
) -> Result<EncodedVideo> {
    let video_id = check_video_words(words, codebook.kind())?.to_owned();
    let m = codebook.size();
    let k = words.len();
    let mut vector = DVector::zeros(m * k);
    for (j, word) in words.iter().enumerate() {
        let dists = codebook.distances_to(word.point())?;
        for (i, d) in dists.into_iter().enumerate() {
            vector[i * k + j] = d;
        }
    }
    for i in 0..m {
        let mut row = vector.rows_mut(i * k, k);
        let total = row.sum();
        if total > 0.0 {
            row /= total;
        }
    }
    EncodedVideo::from_parts(
        video_id,
        EncodingMethod::Bovw,
        codebook.kind(),
        m,
        k,
        vector,
    )
}

/// Unnormalized VLAD accumulation: per center, the summed difference
/// between the projected embeddings of its nearest words and of the center
/// itself. Nearest-center assignment happens on the manifold.
pub fn vlad_raw(
    codebook: &KarcherCodebook,
    pca: &PcaProjection,
    words: &[MidLevelWord],
) -> Result<DVector<f64>> {
    check_video_words(words, codebook.kind())?;
    let m = codebook.size();
    let d = pca.output_dim();
    let projected_centers: Vec<DVector<f64>> = codebook
        .centers()
        .iter()
        .map(|c| pca.project(&embed_word_point(c)?))
        .collect::<Result<_>>()?;
    let mut acc = DVector::zeros(m * d);
    for word in words {
        let (nearest, _) = codebook.nearest_center(word.point())?;
        let phi = pca.project(&embed_word_point(word.point())?)?;
        let residual = phi - &projected_centers[nearest];
        for j in 0..d {
            acc[nearest * d + j] += residual[j];
        }
    }
    Ok(acc)
}

/// VLAD encoding: accumulated projected residuals per nearest center,
/// then one global L2 normalization. All words exactly on centers yield
/// the all-zero vector.
pub fn encode_vlad(
    codebook: &KarcherCodebook,
    pca: &PcaProjection,
    words: &[MidLevelWord],
) -> Result<EncodedVideo> {
    let video_id = check_video_words(words, codebook.kind())?.to_owned();
    let mut acc = vlad_raw(codebook, pca, words)?;
    let norm = acc.norm();
    if norm > 0.0 {
        acc /= norm;
    }
    EncodedVideo::from_parts(
        video_id,
        EncodingMethod::Vlad,
        codebook.kind(),
        codebook.size(),
        pca.output_dim(),
        acc,
    )
}

/// Which variance score the Fisher vector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherVariant {
    /// Standardized squared residual minus 1, the estimator with zero
    /// expectation under the model. The default.
    Corrected,
    /// Plain standardized squared residual, no subtraction.
    Uncorrected,
}

/// Unnormalized Fisher scores of projected words under the mixture: all M
/// mean blocks followed by all M variance blocks, 2·M·D entries.
pub fn fisher_scores(
    gmm: &RiemannianGmm,
    projected: &[DVector<f64>],
    variant: FisherVariant,
) -> Result<DVector<f64>> {
    if projected.is_empty() {
        return Err(Error::Empty("no projected words to score".into()));
    }
    let m = gmm.component_count();
    let d = gmm.projected_dim();
    let k = projected.len() as f64;
    let correction = match variant {
        FisherVariant::Corrected => 1.0,
        FisherVariant::Uncorrected => 0.0,
    };
    let mut mean_part = DMatrix::<f64>::zeros(m, d);
    let mut var_part = DMatrix::<f64>::zeros(m, d);
    for phi in projected {
        let gamma = gmm.posteriors(phi)?;
        for c in 0..m {
            for j in 0..d {
                let sigma = gmm.variances()[(c, j)].sqrt();
                let z = (phi[j] - gmm.means()[(c, j)]) / sigma;
                mean_part[(c, j)] += gamma[c] * z;
                var_part[(c, j)] += gamma[c] * (z * z - correction);
            }
        }
    }
    let mut out = DVector::zeros(2 * m * d);
    for c in 0..m {
        let w = gmm.weights()[c];
        let mean_scale = 1.0 / (k * w.sqrt());
        let var_scale = 1.0 / (k * (2.0 * w).sqrt());
        for j in 0..d {
            out[c * d + j] = mean_scale * mean_part[(c, j)];
            out[m * d + c * d + j] = var_scale * var_part[(c, j)];
        }
    }
    Ok(out)
}

/// Fisher vector encoding with the corrected variance score: embed and
/// project the words, take mean and variance Fisher scores per component,
/// then power-normalize and L2-normalize.
pub fn encode_fisher(gmm: &RiemannianGmm, words: &[MidLevelWord]) -> Result<EncodedVideo> {
    encode_fisher_with(gmm, words, FisherVariant::Corrected)
}

/// [`encode_fisher`] with an explicit variance-score variant.
pub fn encode_fisher_with(
    gmm: &RiemannianGmm,
    words: &[MidLevelWord],
    variant: FisherVariant,
) -> Result<EncodedVideo> {
    let video_id = check_video_words(words, gmm.kind())?.to_owned();
    let projected = gmm.project_words(words)?;
    let raw = fisher_scores(gmm, &projected, variant)?;
    let vector = power_l2_normalize(&raw);
    EncodedVideo::from_parts(
        video_id,
        EncodingMethod::FisherVector,
        gmm.kind(),
        gmm.component_count(),
        gmm.projected_dim(),
        vector,
    )
}

/// Signed square root of each entry, then L2 normalization. The all-zero
/// vector passes through unchanged.
pub fn power_l2_normalize(v: &DVector<f64>) -> DVector<f64> {
    let mut out = v.map(|z| z.signum() * z.abs().sqrt());
    let norm = out.norm();
    if norm > 0.0 {
        out /= norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{KarcherCodebook, RiemannianGmm, embed_words, k_karcher_means};
    use crate::manifold::{SymPosDef, spd_geodesic_dist};
    use crate::testutil::random_spd;
    use crate::words::WordPoint;
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cov_word(mat: DMatrix<f64>, id: &str, index: usize) -> MidLevelWord {
        MidLevelWord::new(
            WordKind::Covariance,
            WordPoint::Spd(SymPosDef::new(mat).unwrap()),
            id,
            index,
        )
        .unwrap()
    }

    fn diag_word(entries: &[f64], id: &str, index: usize) -> MidLevelWord {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(entries));
        cov_word(m, id, index)
    }

    fn spd_codebook(mats: Vec<DMatrix<f64>>) -> KarcherCodebook {
        let centers = mats
            .into_iter()
            .map(|m| WordPoint::Spd(SymPosDef::new(m).unwrap()))
            .collect();
        KarcherCodebook::from_parts(WordKind::Covariance, centers).unwrap()
    }

    fn random_words(n: usize, dim: usize, seed: u64) -> Vec<MidLevelWord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| cov_word(random_spd(dim, &mut rng).into_matrix(), "vid", i))
            .collect()
    }

    fn embedding_pca(words: &[MidLevelWord]) -> PcaProjection {
        let dim = embed_words(words).unwrap()[0].len();
        PcaProjection::identity(dim)
    }

    #[test]
    fn bovw_rows_sum_to_one_for_positive_distances() {
        let words = random_words(6, 3, 1);
        let book = spd_codebook(vec![
            DMatrix::identity(3, 3) * 0.5,
            DMatrix::identity(3, 3) * 5.0,
        ]);
        let enc = encode_bovw(&book, &words).unwrap();
        assert_eq!(enc.vector().len(), 2 * 6);
        for i in 0..2 {
            let row_sum: f64 = (0..6).map(|j| enc.vector()[i * 6 + j]).sum();
            assert_relative_eq!(row_sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bovw_zero_row_stays_zero() {
        let center = DMatrix::identity(3, 3) * 2.0;
        let book = spd_codebook(vec![center.clone(), DMatrix::identity(3, 3) * 9.0]);
        let words: Vec<MidLevelWord> = (0..4)
            .map(|i| cov_word(center.clone(), "vid", i))
            .collect();
        let enc = encode_bovw(&book, &words).unwrap();
        for j in 0..4 {
            assert_eq!(enc.vector()[j], 0.0, "row 0 should be all zero");
        }
        let second_row: f64 = (4..8).map(|i| enc.vector()[i]).sum();
        assert_relative_eq!(second_row, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bovw_single_codeword_row_sums_to_one() {
        let words = random_words(5, 3, 2);
        let book = spd_codebook(vec![DMatrix::identity(3, 3)]);
        let enc = encode_bovw(&book, &words).unwrap();
        assert_relative_eq!(enc.vector().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bovw_is_invariant_to_congruence_of_words_and_centers() {
        let words = random_words(6, 3, 3);
        let book = spd_codebook(vec![
            DMatrix::identity(3, 3) * 0.3,
            DMatrix::identity(3, 3) * 4.0,
        ]);
        let base = encode_bovw(&book, &words).unwrap();

        let mut a = DMatrix::from_fn(3, 3, |i, j| ((1 + i * 3 + j) as f64).sin());
        a += DMatrix::identity(3, 3) * 2.5;
        let map = |m: &DMatrix<f64>| &a * m * a.transpose();
        let mapped_words: Vec<MidLevelWord> = words
            .iter()
            .enumerate()
            .map(|(i, w)| cov_word(map(w.as_spd().unwrap().matrix()), "vid", i))
            .collect();
        let mapped_book = spd_codebook(
            book.centers()
                .iter()
                .map(|c| match c {
                    WordPoint::Spd(s) => map(s.matrix()),
                    WordPoint::Subspace(_) => unreachable!(),
                })
                .collect(),
        );
        let mapped = encode_bovw(&mapped_book, &mapped_words).unwrap();
        assert_relative_eq!(base.vector(), mapped.vector(), epsilon = 1e-10);
    }

    #[test]
    fn bovw_is_invariant_to_uniform_distance_scaling() {
        // Diagonal matrices commute, so raising everything to a power
        // scales every geodesic distance by that power.
        let words = vec![
            diag_word(&[1.0, 2.0, 0.5], "vid", 0),
            diag_word(&[3.0, 1.0, 1.0], "vid", 1),
            diag_word(&[0.2, 5.0, 2.0], "vid", 2),
        ];
        let book = spd_codebook(vec![
            DMatrix::from_diagonal(&dvector![1.0, 1.0, 1.0]),
            DMatrix::from_diagonal(&dvector![4.0, 0.5, 2.0]),
        ]);
        let base = encode_bovw(&book, &words).unwrap();

        let c = 2.5;
        let pow = |m: &DMatrix<f64>| m.map(|v| v.powf(c));
        let scaled_words: Vec<MidLevelWord> = words
            .iter()
            .enumerate()
            .map(|(i, w)| cov_word(pow(w.as_spd().unwrap().matrix()), "vid", i))
            .collect();
        let scaled_book = spd_codebook(
            book.centers()
                .iter()
                .map(|p| match p {
                    WordPoint::Spd(s) => pow(s.matrix()),
                    WordPoint::Subspace(_) => unreachable!(),
                })
                .collect(),
        );
        let scaled = encode_bovw(&scaled_book, &scaled_words).unwrap();
        assert_relative_eq!(base.vector(), scaled.vector(), epsilon = 1e-10);
    }

    #[test]
    fn bovw_rejects_empty_videos_and_foreign_kinds() {
        let book = spd_codebook(vec![DMatrix::identity(2, 2)]);
        assert!(matches!(encode_bovw(&book, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn vlad_matches_a_double_loop_oracle() {
        let words = random_words(8, 3, 4);
        let fit = k_karcher_means(&words, 2, 5, 100).unwrap();
        let pca = embedding_pca(&words);
        let raw = vlad_raw(&fit.codebook, &pca, &words).unwrap();

        let d = pca.output_dim();
        let mut oracle = DVector::zeros(2 * d);
        for w in &words {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in fit.codebook.centers().iter().enumerate() {
                let dist = spd_geodesic_dist(
                    match center {
                        WordPoint::Spd(s) => s,
                        WordPoint::Subspace(_) => unreachable!(),
                    },
                    w.as_spd().unwrap(),
                )
                .unwrap();
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            let phi = pca.project(&embed_word_point(w.point()).unwrap()).unwrap();
            let center_phi = pca
                .project(&embed_word_point(&fit.codebook.centers()[best]).unwrap())
                .unwrap();
            for j in 0..d {
                oracle[best * d + j] += phi[j] - center_phi[j];
            }
        }
        assert_relative_eq!(raw, oracle, epsilon = 1e-12);
    }

    #[test]
    fn vlad_of_words_on_centers_is_the_zero_vector() {
        let c0 = DMatrix::identity(3, 3) * 0.5;
        let c1 = DMatrix::identity(3, 3) * 3.0;
        let book = spd_codebook(vec![c0.clone(), c1.clone()]);
        let words = vec![
            cov_word(c0.clone(), "vid", 0),
            cov_word(c1.clone(), "vid", 1),
            cov_word(c0, "vid", 2),
        ];
        let pca = embedding_pca(&words);
        let enc = encode_vlad(&book, &pca, &words).unwrap();
        assert_eq!(enc.vector().norm(), 0.0);
    }

    #[test]
    fn vlad_single_word_single_center_is_the_residual_direction() {
        let center = DMatrix::identity(3, 3);
        let book = spd_codebook(vec![center]);
        let words = vec![cov_word(DMatrix::identity(3, 3) * 4.0, "vid", 0)];
        let pca = embedding_pca(&words);
        let enc = encode_vlad(&book, &pca, &words).unwrap();

        let phi = pca
            .project(&embed_word_point(words[0].point()).unwrap())
            .unwrap();
        let center_phi = pca
            .project(&embed_word_point(&book.centers()[0]).unwrap())
            .unwrap();
        let expected = (&phi - &center_phi) / (&phi - &center_phi).norm();
        assert_relative_eq!(enc.vector(), &expected, epsilon = 1e-12);
    }

    #[test]
    fn vlad_is_translation_consistent_in_embedding_space() {
        let words = random_words(6, 3, 6);
        let fit = k_karcher_means(&words, 2, 7, 100).unwrap();
        let dim = embed_words(&words).unwrap()[0].len();
        let pca = PcaProjection::identity(dim);
        // Shifting the projection center shifts every projected vector by
        // the same constant, which must cancel in the residuals.
        let shifted = PcaProjection::from_parts(
            pca.mean() + DVector::from_element(dim, 0.37),
            pca.rows().clone(),
        )
        .unwrap();
        let a = vlad_raw(&fit.codebook, &pca, &words).unwrap();
        let b = vlad_raw(&fit.codebook, &shifted, &words).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    fn tiny_gmm(d: usize) -> RiemannianGmm {
        let pca = PcaProjection::identity(d);
        let weights = dvector![0.4, 0.6];
        let means = DMatrix::from_fn(2, d, |i, j| if i == 0 { j as f64 } else { -1.0 });
        let variances = DMatrix::from_fn(2, d, |i, j| 0.5 + 0.1 * (i + j) as f64);
        RiemannianGmm::from_parts(WordKind::Covariance, pca, weights, means, variances).unwrap()
    }

    #[test]
    fn fisher_variance_block_distinguishes_the_variants() {
        let gmm = tiny_gmm(3);
        // Every projected word sits exactly on component 0's mean.
        let mu0 = gmm.means().row(0).transpose();
        let projected = vec![mu0.clone(), mu0.clone(), mu0];
        let corrected = fisher_scores(&gmm, &projected, FisherVariant::Corrected).unwrap();
        let plain = fisher_scores(&gmm, &projected, FisherVariant::Uncorrected).unwrap();

        let d = 3;
        let gamma0 = gmm.posteriors(&projected[0]).unwrap()[0];
        for j in 0..d {
            // Zero residual: mean block vanishes for component 0 either way.
            assert_relative_eq!(corrected[j], 0.0, epsilon = 1e-12);
            assert_relative_eq!(plain[j], 0.0, epsilon = 1e-12);
            // Corrected variance block collects -γ/√(2w); plain collects 0.
            let expected = -gamma0 / (2.0 * gmm.weights()[0]).sqrt();
            assert_relative_eq!(corrected[2 * d + j], expected, epsilon = 1e-12);
            assert_relative_eq!(plain[2 * d + j], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fisher_single_component_is_the_average_standardized_residual() {
        let d = 3;
        let pca = PcaProjection::identity(d);
        let means = DMatrix::from_fn(1, d, |_, j| j as f64 * 0.5);
        let variances = DMatrix::from_element(1, d, 2.0);
        let gmm = RiemannianGmm::from_parts(
            WordKind::Covariance,
            pca,
            dvector![1.0],
            means.clone(),
            variances.clone(),
        )
        .unwrap();
        let projected = vec![
            dvector![1.0, 0.0, 2.0],
            dvector![0.0, 1.0, -1.0],
            dvector![0.5, 0.5, 0.5],
        ];
        let raw = fisher_scores(&gmm, &projected, FisherVariant::Corrected).unwrap();
        let k = projected.len() as f64;
        for j in 0..d {
            let sigma = variances[(0, j)].sqrt();
            let mean_score: f64 = projected
                .iter()
                .map(|p| (p[j] - means[(0, j)]) / sigma)
                .sum::<f64>()
                / k;
            assert_relative_eq!(raw[j], mean_score, epsilon = 1e-12);
        }
    }

    /// Log-likelihood of a diagonal Gaussian mixture, written directly from
    /// the density formula as an oracle for gradient checks.
    fn mixture_log_likelihood(
        weights: &DVector<f64>,
        means: &DMatrix<f64>,
        variances: &DMatrix<f64>,
        projected: &[DVector<f64>],
    ) -> f64 {
        let mut total = 0.0;
        for phi in projected {
            let mut component_sum = 0.0;
            for c in 0..weights.len() {
                let mut density = weights[c];
                for j in 0..phi.len() {
                    let var = variances[(c, j)];
                    let diff = phi[j] - means[(c, j)];
                    density *= (-(diff * diff) / (2.0 * var)).exp()
                        / (2.0 * std::f64::consts::PI * var).sqrt();
                }
                component_sum += density;
            }
            total += component_sum.ln();
        }
        total
    }

    #[test]
    fn fisher_scores_match_the_likelihood_gradient() {
        let gmm = tiny_gmm(3);
        let projected = vec![
            dvector![0.3, 1.2, 2.2],
            dvector![-0.9, -1.1, -0.8],
            dvector![0.1, 0.4, 1.7],
            dvector![-1.3, -0.7, -1.2],
        ];
        let raw = fisher_scores(&gmm, &projected, FisherVariant::Corrected).unwrap();
        let k = projected.len() as f64;
        let (m, d) = (2, 3);
        let step = 1e-5;
        for c in 0..m {
            let w = gmm.weights()[c];
            for j in 0..d {
                // Mean block equals σ/(K√w) times ∂/∂μ of the log-likelihood.
                let mut up = gmm.means().clone();
                up[(c, j)] += step;
                let mut down = gmm.means().clone();
                down[(c, j)] -= step;
                let grad_mu = (mixture_log_likelihood(gmm.weights(), &up, gmm.variances(), &projected)
                    - mixture_log_likelihood(gmm.weights(), &down, gmm.variances(), &projected))
                    / (2.0 * step);
                let sigma = gmm.variances()[(c, j)].sqrt();
                let expected = sigma / (k * w.sqrt()) * grad_mu;
                assert_relative_eq!(raw[c * d + j], expected, max_relative = 1e-4);

                // Variance block equals σ/(K√(2w)) times ∂/∂σ.
                let mut vu = gmm.variances().clone();
                let su = sigma + step;
                vu[(c, j)] = su * su;
                let mut vd = gmm.variances().clone();
                let sd = sigma - step;
                vd[(c, j)] = sd * sd;
                let grad_sigma = (mixture_log_likelihood(gmm.weights(), gmm.means(), &vu, &projected)
                    - mixture_log_likelihood(gmm.weights(), gmm.means(), &vd, &projected))
                    / (2.0 * step);
                let expected = sigma / (k * (2.0 * w).sqrt()) * grad_sigma;
                assert_relative_eq!(raw[m * d + c * d + j], expected, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn power_l2_matches_the_hand_example() {
        let v = dvector![4.0, 0.0, -4.0];
        let out = power_l2_normalize(&v);
        let expected = dvector![2.0, 0.0, -2.0] / 8.0f64.sqrt();
        assert_relative_eq!(out, expected, epsilon = 1e-15);
    }

    #[test]
    fn power_l2_fixes_unit_basis_vectors_and_zero() {
        let e2 = dvector![0.0, 1.0, 0.0];
        assert_eq!(power_l2_normalize(&e2), e2);
        let zero = DVector::zeros(4);
        assert_eq!(power_l2_normalize(&zero), zero);
    }

    #[test]
    fn power_l2_outputs_unit_norm_for_nonzero_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = crate::testutil::random_vector(9, &mut rng);
        assert_relative_eq!(power_l2_normalize(&v).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_fisher_encoding_is_deterministic_and_unit_norm() {
        let words = random_words(25, 3, 9);
        let fit = crate::codebook::fit_riemannian_gmm(&words, 2, 4, 13).unwrap();
        let a = encode_fisher(&fit.model, &words).unwrap();
        let b = encode_fisher(&fit.model, &words).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.vector().len(), 2 * 2 * 4);
        assert_relative_eq!(a.vector().norm(), 1.0, epsilon = 1e-10);
        assert_eq!(a.video_id(), "vid");
        assert_eq!(a.method(), EncodingMethod::FisherVector);
    }

    #[test]
    fn encoded_video_validates_length_and_norm() {
        assert!(matches!(
            EncodedVideo::from_parts(
                "v",
                EncodingMethod::Bovw,
                WordKind::Covariance,
                2,
                3,
                DVector::zeros(5),
            ),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            EncodedVideo::from_parts(
                "v",
                EncodingMethod::Vlad,
                WordKind::Covariance,
                1,
                3,
                dvector![2.0, 0.0, 0.0],
            ),
            Err(Error::InvalidInput(_))
        ));
        let zero = EncodedVideo::from_parts(
            "v",
            EncodingMethod::Vlad,
            WordKind::Covariance,
            1,
            3,
            DVector::zeros(3),
        );
        assert!(zero.is_ok());
    }
}
