//! End-to-end orchestration: configuration, stage seeding, synthetic data,
//! and the full train/encode pipeline with a nearest-centroid evaluator.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::time::Instant;

use crate::alignment::{
    build_feature_groups, build_feature_groups_padded, fit_pca, fit_spherical_gmm, DescriptorSet,
    PcaProjection, SphericalGmm,
};
use crate::codebook::{fit_riemannian_gmm, k_karcher_means, KarcherCodebook, RiemannianGmm};
use crate::encoding::{
    encode_bovw, encode_fisher_with, encode_vlad, EncodedVideo, EncodingMethod, FisherVariant,
};
use crate::error::{Error, Result};
use crate::words::{model_covariance, model_gaussian_spd, model_subspace, MidLevelWord, WordKind};

/// Default iteration cap forwarded to the codebook clustering stage.
const CODEBOOK_MAX_ITER: usize = 100;

/// Everything needed to run the pipeline, serializable as a TOML config file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Dimension of the raw input descriptors.
    pub descriptor_dim: usize,
    /// Fraction of `descriptor_dim` kept after the initial linear reduction.
    pub pca_factor: f64,
    /// Component count of the alignment mixture (one word per component).
    pub gmm_components: usize,
    /// Descriptors per feature group.
    pub group_size: usize,
    /// Statistical model used for the words.
    pub word_kind: WordKind,
    /// Subspace rank; only used when `word_kind` is `subspace`.
    pub subspace_r: usize,
    /// Number of codebook centers (BoVW, VLAD) or mixture components (FV).
    pub codebook_size: usize,
    /// Output dimension of the word-space reduction used by VLAD and FV.
    pub embedding_dim: usize,
    /// Aggregation scheme producing the final per-video vector.
    pub encoder: EncodingMethod,
    /// Drop the variance-score centering term, matching the plain formula.
    pub strict_fisher: bool,
    /// Repeat descriptors in groups that fall short instead of erroring.
    pub pad_short_videos: bool,
    /// Root seed; every random stage derives its own seed from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::full(WordKind::Covariance, EncodingMethod::FisherVector)
    }
}

impl PipelineConfig {
    /// Full-scale defaults: 256 mixture components, groups of 64,
    /// 32 codebook centers (64 for BoVW), 256 embedding dimensions.
    pub fn full(word_kind: WordKind, encoder: EncodingMethod) -> Self {
        PipelineConfig {
            descriptor_dim: 96,
            pca_factor: 0.5,
            gmm_components: 256,
            group_size: 64,
            word_kind,
            subspace_r: 5,
            codebook_size: if encoder == EncodingMethod::Bovw { 64 } else { 32 },
            embedding_dim: 256,
            encoder,
            strict_fisher: false,
            pad_short_videos: false,
            seed: 0,
        }
    }

    /// Small defaults sized so the whole pipeline runs in seconds.
    /// Descriptors stay at full dimension: halving d=8 would leave a
    /// word embedding smaller than the 16 requested output dimensions.
    pub fn desk(word_kind: WordKind, encoder: EncodingMethod) -> Self {
        PipelineConfig {
            descriptor_dim: 8,
            pca_factor: 1.0,
            gmm_components: 16,
            group_size: 16,
            word_kind,
            subspace_r: 2,
            codebook_size: 4,
            embedding_dim: 16,
            encoder,
            strict_fisher: false,
            pad_short_videos: false,
            seed: 0,
        }
    }

    /// Descriptor dimension after the initial reduction, at least 1.
    pub fn projected_dim(&self) -> usize {
        let p = (self.descriptor_dim as f64 * self.pca_factor).round() as usize;
        p.clamp(1, self.descriptor_dim)
    }

    /// Euclidean dimension of the word embedding: symmetric-matrix
    /// coordinates of the projection matrix (subspace words) or of the
    /// matrix logarithm (SPD words).
    pub fn word_embedding_dim(&self) -> usize {
        let p = self.projected_dim();
        match self.word_kind {
            WordKind::Subspace | WordKind::Covariance => p * (p + 1) / 2,
            WordKind::GaussianSpd => (p + 1) * (p + 2) / 2,
        }
    }

    /// Length of the final encoded vector per video.
    pub fn encoding_len(&self) -> usize {
        let block = match self.encoder {
            EncodingMethod::Bovw => self.gmm_components,
            EncodingMethod::Vlad | EncodingMethod::FisherVector => self.embedding_dim,
        };
        self.encoder.vector_len(self.codebook_size, block)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
            Ok(())
        }
        positive("descriptor_dim", self.descriptor_dim)?;
        positive("gmm_components", self.gmm_components)?;
        positive("group_size", self.group_size)?;
        positive("subspace_r", self.subspace_r)?;
        positive("codebook_size", self.codebook_size)?;
        positive("embedding_dim", self.embedding_dim)?;
        if !(self.pca_factor.is_finite() && self.pca_factor > 0.0 && self.pca_factor <= 1.0) {
            return Err(Error::Config(format!(
                "pca_factor must lie in (0, 1], got {}",
                self.pca_factor
            )));
        }
        if self.group_size <= self.subspace_r {
            return Err(Error::Config(format!(
                "group_size {} must exceed subspace_r {}",
                self.group_size, self.subspace_r
            )));
        }
        if self.word_kind == WordKind::Subspace && self.subspace_r >= self.projected_dim() {
            return Err(Error::Config(format!(
                "subspace_r {} must be below the projected dimension {}",
                self.subspace_r,
                self.projected_dim()
            )));
        }
        let edim = self.word_embedding_dim();
        if self.embedding_dim > edim {
            return Err(Error::Config(format!(
                "embedding_dim {} exceeds the word embedding dimension {edim}",
                self.embedding_dim
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialized config; identifies a run setup.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Seed for one named stage, derived from the root seed so stages draw
/// independent streams and adding a stage never shifts another's.
pub fn stage_seed(root: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Shape of a synthetic labeled descriptor corpus.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub videos_per_class: usize,
    /// Descriptors per video.
    pub features_per_video: usize,
    pub descriptor_dim: usize,
    /// Mixture clusters per class.
    pub cluster_count: usize,
    /// Scale of the cluster centers; larger separates classes more.
    pub center_spread: f64,
    /// Two zero-mean classes whose covariances differ only by a rotation,
    /// so first-order statistics carry no class signal.
    pub covariance_only: bool,
    /// Determines the class layouts (cluster centers and covariance shapes).
    /// Corpora sharing this value draw from the same class distributions,
    /// so train and test splits can vary `seed` alone.
    pub class_seed: u64,
    /// Determines the video draws given the class layouts.
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            class_count: 4,
            videos_per_class: 20,
            features_per_video: 200,
            descriptor_dim: 8,
            cluster_count: 3,
            center_spread: 3.0,
            covariance_only: false,
            class_seed: 0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
            Ok(())
        }
        positive("class_count", self.class_count)?;
        positive("videos_per_class", self.videos_per_class)?;
        positive("features_per_video", self.features_per_video)?;
        positive("descriptor_dim", self.descriptor_dim)?;
        positive("cluster_count", self.cluster_count)?;
        if !(self.center_spread.is_finite() && self.center_spread > 0.0) {
            return Err(Error::Config(format!(
                "center_spread must be positive and finite, got {}",
                self.center_spread
            )));
        }
        if self.covariance_only && (self.class_count != 2 || self.descriptor_dim < 2) {
            return Err(Error::Config(
                "covariance_only mode needs exactly 2 classes and dimension >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Per-class sampling parameters: cluster centers plus a Cholesky factor
/// per cluster, so a feature is center + L z with z standard normal.
struct ClassModel {
    centers: Vec<DVector<f64>>,
    factors: Vec<DMatrix<f64>>,
}

fn class_model(spec: &SyntheticSpec, class: usize) -> ClassModel {
    let d = spec.descriptor_dim;
    if spec.covariance_only {
        // Zero-mean; identical covariance spectra, orientations 45 degrees
        // apart in the first coordinate plane.
        let mut factor = DMatrix::<f64>::identity(d, d);
        factor[(0, 0)] = 3.0;
        if class == 1 {
            let mut rot = DMatrix::<f64>::identity(d, d);
            let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
            rot[(0, 0)] = c;
            rot[(0, 1)] = -s;
            rot[(1, 0)] = s;
            rot[(1, 1)] = c;
            factor = rot * factor;
        }
        return ClassModel { centers: vec![DVector::zeros(d)], factors: vec![factor] };
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(stage_seed(spec.class_seed, &format!("class-params-{class}")));
    let mut centers = Vec::with_capacity(spec.cluster_count);
    let mut factors = Vec::with_capacity(spec.cluster_count);
    for _ in 0..spec.cluster_count {
        let center = DVector::from_fn(d, |_, _| {
            spec.center_spread * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let a = DMatrix::from_fn(d, d, |_, _| {
            0.4 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let spd = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
        let factor = spd.cholesky().expect("shifted Gram matrix is positive definite").l();
        centers.push(center);
        factors.push(factor);
    }
    ClassModel { centers, factors }
}

/// Draw a labeled synthetic corpus: `(descriptor set, class label)` pairs,
/// grouped by class, fully determined by the requested shape and seed.
///
/// Every value is quantized to f32 precision so the sets survive a trip
/// through the 32-bit descriptor file format bit-exactly.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<(DescriptorSet, String)>> {
    spec.validate()?;
    let d = spec.descriptor_dim;
    let models: Vec<ClassModel> = (0..spec.class_count).map(|c| class_model(spec, c)).collect();
    let mut out = Vec::with_capacity(spec.class_count * spec.videos_per_class);
    for (c, model) in models.iter().enumerate() {
        for v in 0..spec.videos_per_class {
            let mut rng =
                ChaCha8Rng::seed_from_u64(stage_seed(spec.seed, &format!("video-{c}-{v}")));
            let mut features = DMatrix::<f64>::zeros(spec.features_per_video, d);
            for i in 0..spec.features_per_video {
                let j = rand::Rng::random_range(&mut rng, 0..model.centers.len());
                let z = DVector::from_fn(d, |_, _| {
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                });
                let x = &model.centers[j] + &model.factors[j] * z;
                for k in 0..d {
                    features[(i, k)] = f64::from(x[k] as f32);
                }
            }
            let set = DescriptorSet::new(format!("c{c}v{v:03}"), features)?;
            out.push((set, format!("class{c}")));
        }
    }
    Ok(out)
}

/// Reduction plus alignment mixture, fit on training descriptors only.
pub fn fit_alignment_models(
    config: &PipelineConfig,
    train_sets: &[DescriptorSet],
) -> Result<(PcaProjection, SphericalGmm)> {
    config.validate()?;
    check_input_dims(config, train_sets)?;
    let stacked = stack_features(train_sets)?;
    let pca = fit_pca(&stacked, config.projected_dim()).map_err(|e| e.in_stage("pca"))?;
    let projected = pca.project_rows(&stacked).map_err(|e| e.in_stage("pca"))?;
    let seed = stage_seed(config.seed, "alignment-gmm");
    let fit = fit_spherical_gmm(&projected, config.gmm_components, seed)
        .map_err(|e| e.in_stage("alignment"))?;
    Ok((pca, fit.model))
}

/// Words for each video: one inner vector per input set, one word per
/// mixture component, in component order.
pub fn build_video_words(
    config: &PipelineConfig,
    pca: &PcaProjection,
    gmm: &SphericalGmm,
    sets: &[DescriptorSet],
) -> Result<Vec<Vec<MidLevelWord>>> {
    sets.par_iter()
        .map(|set| video_words(config, pca, gmm, set))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("words"))
}

fn video_words(
    config: &PipelineConfig,
    pca: &PcaProjection,
    gmm: &SphericalGmm,
    set: &DescriptorSet,
) -> Result<Vec<MidLevelWord>> {
    let projected = pca.project_rows(set.features())?;
    let reduced = DescriptorSet::new(set.video_id(), projected)?;
    let groups = if config.pad_short_videos {
        build_feature_groups_padded(gmm, &reduced, config.group_size)?
    } else {
        build_feature_groups(gmm, &reduced, config.group_size)?
    };
    groups
        .iter()
        .map(|group| match config.word_kind {
            WordKind::Subspace => model_subspace(group, config.subspace_r),
            WordKind::Covariance => model_covariance(group),
            WordKind::GaussianSpd => model_gaussian_spd(group),
        })
        .collect()
}

/// The fitted aggregation model: a geodesic codebook for BoVW, the same
/// plus a word-space reduction for VLAD, or a mixture over reduced word
/// coordinates for FV.
#[derive(Debug, Clone)]
pub enum EncoderModel {
    Bovw(KarcherCodebook),
    Vlad(KarcherCodebook, PcaProjection),
    Fisher(RiemannianGmm),
}

impl EncoderModel {
    pub fn method(&self) -> EncodingMethod {
        match self {
            EncoderModel::Bovw(_) => EncodingMethod::Bovw,
            EncoderModel::Vlad(..) => EncodingMethod::Vlad,
            EncoderModel::Fisher(_) => EncodingMethod::FisherVector,
        }
    }
}

/// Fit the aggregation model on training words only.
pub fn fit_encoder_model(
    config: &PipelineConfig,
    train_words: &[MidLevelWord],
) -> Result<EncoderModel> {
    match config.encoder {
        EncodingMethod::Bovw => {
            let seed = stage_seed(config.seed, "codebook");
            let fit = k_karcher_means(train_words, config.codebook_size, seed, CODEBOOK_MAX_ITER)
                .map_err(|e| e.in_stage("codebook"))?;
            Ok(EncoderModel::Bovw(fit.codebook))
        }
        EncodingMethod::Vlad => {
            let seed = stage_seed(config.seed, "codebook");
            let fit = k_karcher_means(train_words, config.codebook_size, seed, CODEBOOK_MAX_ITER)
                .map_err(|e| e.in_stage("codebook"))?;
            let embedded = crate::codebook::embed_words(train_words)
                .map_err(|e| e.in_stage("codebook"))?;
            let rows = rows_from_vectors(&embedded);
            let pca = fit_pca(&rows, config.embedding_dim).map_err(|e| e.in_stage("codebook"))?;
            Ok(EncoderModel::Vlad(fit.codebook, pca))
        }
        EncodingMethod::FisherVector => {
            let seed = stage_seed(config.seed, "embedding-gmm");
            let fit = fit_riemannian_gmm(train_words, config.codebook_size, config.embedding_dim, seed)
                .map_err(|e| e.in_stage("codebook"))?;
            Ok(EncoderModel::Fisher(fit.model))
        }
    }
}

/// Encode one video's words under the fitted model.
pub fn encode_video(
    config: &PipelineConfig,
    model: &EncoderModel,
    words: &[MidLevelWord],
) -> Result<EncodedVideo> {
    match model {
        EncoderModel::Bovw(codebook) => encode_bovw(codebook, words),
        EncoderModel::Vlad(codebook, pca) => encode_vlad(codebook, pca, words),
        EncoderModel::Fisher(gmm) => {
            let variant = if config.strict_fisher {
                FisherVariant::Uncorrected
            } else {
                FisherVariant::Corrected
            };
            encode_fisher_with(gmm, words, variant)
        }
    }
}

fn encode_all(
    config: &PipelineConfig,
    model: &EncoderModel,
    words: &[Vec<MidLevelWord>],
) -> Result<Vec<EncodedVideo>> {
    words
        .par_iter()
        .map(|w| encode_video(config, model, w))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("encode"))
}

/// Manifest of one pipeline run: what was configured, which seeds each
/// stage drew, and how long each stage took.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub root_seed: u64,
    pub stage_seeds: Vec<(String, u64)>,
    pub stage_timings_ms: Vec<(String, u64)>,
    pub train_word_count: usize,
    pub test_word_count: usize,
}

/// Encodings for both splits plus the run manifest.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub train: Vec<EncodedVideo>,
    pub test: Vec<EncodedVideo>,
    pub report: RunReport,
}

fn check_input_dims(config: &PipelineConfig, sets: &[DescriptorSet]) -> Result<()> {
    for set in sets {
        if set.dim() != config.descriptor_dim {
            return Err(Error::DimensionMismatch(format!(
                "input: video {} has dimension {}, config says {}",
                set.video_id(),
                set.dim(),
                config.descriptor_dim
            )));
        }
    }
    Ok(())
}

fn stack_features(sets: &[DescriptorSet]) -> Result<DMatrix<f64>> {
    if sets.is_empty() {
        return Err(Error::Empty("no training videos".into()));
    }
    let d = sets[0].dim();
    let total: usize = sets.iter().map(|s| s.len()).sum();
    let mut out = DMatrix::<f64>::zeros(total, d);
    let mut row = 0;
    for set in sets {
        out.view_mut((row, 0), (set.len(), d)).copy_from(set.features());
        row += set.len();
    }
    Ok(out)
}

fn rows_from_vectors(vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, |v| v.len());
    DMatrix::from_fn(n, d, |i, j| vectors[i][j])
}

/// Run every stage in order: reduction, alignment mixture, feature groups,
/// word modeling, codebook or mixture fitting, and encoding. All models
/// are fit on `train_sets` only; `test_sets` are merely projected and
/// encoded. Deterministic in (config, inputs).
pub fn run_pipeline(
    config: &PipelineConfig,
    train_sets: &[DescriptorSet],
    test_sets: &[DescriptorSet],
) -> Result<PipelineOutput> {
    config.validate()?;
    check_input_dims(config, train_sets)?;
    check_input_dims(config, test_sets)?;

    let mut timings: Vec<(String, u64)> = Vec::new();
    let mut stage_seeds: Vec<(String, u64)> = Vec::new();
    let mut mark = Instant::now();
    let record = |timings: &mut Vec<(String, u64)>, name: &str, mark: &mut Instant| {
        timings.push((name.to_owned(), mark.elapsed().as_millis() as u64));
        *mark = Instant::now();
    };

    let (pca, gmm) = fit_alignment_models(config, train_sets)?;
    stage_seeds.push(("alignment-gmm".to_owned(), stage_seed(config.seed, "alignment-gmm")));
    record(&mut timings, "alignment", &mut mark);

    let train_words = build_video_words(config, &pca, &gmm, train_sets)?;
    let test_words = build_video_words(config, &pca, &gmm, test_sets)?;
    record(&mut timings, "words", &mut mark);

    let flat_train: Vec<MidLevelWord> = train_words.iter().flatten().cloned().collect();
    let model = fit_encoder_model(config, &flat_train)?;
    let codebook_label = match config.encoder {
        EncodingMethod::FisherVector => "embedding-gmm",
        _ => "codebook",
    };
    stage_seeds.push((codebook_label.to_owned(), stage_seed(config.seed, codebook_label)));
    record(&mut timings, "codebook", &mut mark);

    let train = encode_all(config, &model, &train_words)?;
    let test = encode_all(config, &model, &test_words)?;
    record(&mut timings, "encode", &mut mark);

    let report = RunReport {
        config_hash: config.hash(),
        root_seed: config.seed,
        stage_seeds,
        stage_timings_ms: timings,
        train_word_count: flat_train.len(),
        test_word_count: test_words.iter().map(Vec::len).sum(),
    };
    Ok(PipelineOutput { train, test, report })
}

/// Pair each encoding with its class label by video id.
pub fn label_encodings(
    encodings: &[EncodedVideo],
    labels: &[(String, String)],
) -> Result<Vec<(DVector<f64>, String)>> {
    let mut by_id: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, label) in labels {
        if by_id.insert(id.as_str(), label.as_str()).is_some() {
            return Err(Error::InvalidInput(format!("duplicate label for video {id}")));
        }
    }
    encodings
        .iter()
        .map(|e| {
            let label = by_id.get(e.video_id()).ok_or_else(|| {
                Error::InvalidInput(format!("no label for video {}", e.video_id()))
            })?;
            Ok((e.vector().clone(), (*label).to_owned()))
        })
        .collect()
}

/// Mean descriptor of a video; a first-order-statistics baseline vector.
pub fn mean_feature_vector(set: &DescriptorSet) -> DVector<f64> {
    set.features().row_mean().transpose()
}

/// Accuracy of nearest-centroid classification: per-class training
/// centroids, each test vector assigned to the closest centroid by
/// Euclidean distance (ties go to the first class in sorted label order).
pub fn nearest_centroid_eval(
    train: &[(DVector<f64>, String)],
    test: &[(DVector<f64>, String)],
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::Empty("no training vectors".into()));
    }
    if test.is_empty() {
        return Err(Error::Empty("no test vectors".into()));
    }
    let dim = train[0].0.len();
    let mut sums: BTreeMap<&str, (DVector<f64>, usize)> = BTreeMap::new();
    for (v, label) in train {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "training vectors have mixed lengths {dim} and {}",
                v.len()
            )));
        }
        let entry = sums
            .entry(label.as_str())
            .or_insert_with(|| (DVector::zeros(dim), 0));
        entry.0 += v;
        entry.1 += 1;
    }
    let centroids: Vec<(&str, DVector<f64>)> = sums
        .into_iter()
        .map(|(label, (sum, count))| (label, sum / count as f64))
        .collect();
    let mut correct = 0usize;
    for (v, label) in test {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "test vector has length {}, training has {dim}",
                v.len()
            )));
        }
        if !centroids.iter().any(|(l, _)| *l == label.as_str()) {
            return Err(Error::Empty(format!("class {label} has no training vector")));
        }
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, (_, c)) in centroids.iter().enumerate() {
            let d = (v - c).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        if centroids[best].0 == label.as_str() {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}
