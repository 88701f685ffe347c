//! Stage-wise command-line front end: each subcommand reads and writes
//! explicit artifact files so intermediate results stay inspectable, and
//! `run-all` chains the stages in memory.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use midword::alignment::DescriptorSet;
use midword::encoding::EncodingMethod;
use midword::error::{Error, Result};
use midword::io;
use midword::pipeline::{
    self, EncoderModel, PipelineConfig, SyntheticSpec,
};
use midword::words::{MidLevelWord, WordKind};

const CONFIG_VERSION: u32 = 1;
const PCA_FILE: &str = "pca.mwpc";
const GMM_FILE: &str = "gmm.mwgm";
const CODEBOOK_FILE: &str = "codebook.mwcb";
const WORD_PCA_FILE: &str = "word-pca.mwpc";
const EMBEDDING_GMM_FILE: &str = "embedding-gmm.mwrg";
const LABELS_FILE: &str = "labels.csv";

#[derive(Parser)]
#[command(name = "midword", version, about = "Mid-level word pipeline over manifold-valued video descriptors")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic descriptor corpus.
    Synth(SynthArgs),
    /// Fit the descriptor reduction and the alignment mixture on training videos.
    FitGmm(FitGmmArgs),
    /// Build per-video mid-level words from descriptor files.
    BuildWords(BuildWordsArgs),
    /// Fit the codebook or word-space mixture on training words.
    FitCodebook(FitCodebookArgs),
    /// Encode word files into fixed-length per-video vectors.
    Encode(EncodeArgs),
    /// Nearest-centroid accuracy of encoded vectors.
    Evaluate(EvaluateArgs),
    /// Run every stage in order and write encodings plus a manifest.
    RunAll(RunAllArgs),
}

/// Configuration file plus command-line overrides shared by the fitting
/// and encoding stages.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the word model.
    #[arg(long, value_enum)]
    word_kind: Option<WordKindArg>,
    /// Override the aggregation method.
    #[arg(long, value_enum)]
    encoder: Option<EncoderArg>,
    /// Drop the centering term in Fisher variance scores.
    #[arg(long)]
    strict_fisher: bool,
    /// Repeat descriptors when a video cannot fill a group.
    #[arg(long)]
    pad_short_videos: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WordKindArg {
    #[value(alias = "subspace")]
    Sub,
    #[value(alias = "covariance")]
    Cov,
    #[value(alias = "gaussian-spd")]
    Gau,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncoderArg {
    Bovw,
    Vlad,
    Fv,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    version: u32,
    pipeline: PipelineConfig,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(&self.config)?;
        let file: ConfigFile = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", self.config.display())))?;
        if file.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported; expected {CONFIG_VERSION}",
                file.version
            )));
        }
        let mut config = file.pipeline;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(kind) = self.word_kind {
            config.word_kind = match kind {
                WordKindArg::Sub => WordKind::Subspace,
                WordKindArg::Cov => WordKind::Covariance,
                WordKindArg::Gau => WordKind::GaussianSpd,
            };
        }
        if let Some(encoder) = self.encoder {
            config.encoder = match encoder {
                EncoderArg::Bovw => EncodingMethod::Bovw,
                EncoderArg::Vlad => EncodingMethod::Vlad,
                EncoderArg::Fv => EncodingMethod::FisherVector,
            };
        }
        if self.strict_fisher {
            config.strict_fisher = true;
        }
        if self.pad_short_videos {
            config.pad_short_videos = true;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus shape (TOML); defaults cover a small four-class corpus.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override the corpus seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving one .mwds file per video plus labels.csv.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct FitGmmArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory of training .mwds files.
    #[arg(long)]
    input_dir: PathBuf,
    /// Directory receiving pca.mwpc and gmm.mwgm.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct BuildWordsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory holding pca.mwpc and gmm.mwgm.
    #[arg(long)]
    models_dir: PathBuf,
    /// Directory of .mwds files to turn into words.
    #[arg(long)]
    input_dir: PathBuf,
    /// Output word file (.mwwd).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitCodebookArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training word file (.mwwd).
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving the fitted codebook artifacts.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory holding the fitted codebook artifacts.
    #[arg(long)]
    models_dir: PathBuf,
    /// Word file to encode (.mwwd).
    #[arg(long)]
    input: PathBuf,
    /// Output encoding file (.mwev).
    #[arg(long)]
    output: PathBuf,
    /// Also export the encodings as one comma-separated line per video.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Training encodings (.mwev).
    #[arg(long)]
    train: PathBuf,
    /// Test encodings (.mwev).
    #[arg(long)]
    test: PathBuf,
    /// Training labels (video_id,label per line).
    #[arg(long)]
    train_labels: PathBuf,
    /// Test labels (video_id,label per line).
    #[arg(long)]
    test_labels: PathBuf,
}

#[derive(Args)]
struct RunAllArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory of training .mwds files (labels.csv enables evaluation).
    #[arg(long)]
    train_dir: PathBuf,
    /// Directory of test .mwds files.
    #[arg(long)]
    test_dir: PathBuf,
    /// Directory receiving train.mwev, test.mwev, and manifest.json.
    #[arg(long)]
    output_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        let built = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
        if let Err(e) = built {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => synth(args),
        Command::FitGmm(args) => fit_gmm(args),
        Command::BuildWords(args) => build_words(args),
        Command::FitCodebook(args) => fit_codebook(args),
        Command::Encode(args) => encode(args),
        Command::Evaluate(args) => evaluate(args),
        Command::RunAll(args) => run_all(args),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<SyntheticSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let corpus = pipeline::generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.output_dir)?;
    for (set, _) in &corpus {
        let path = args.output_dir.join(format!("{}.mwds", set.video_id()));
        io::write_descriptor_set(path, set)?;
    }
    let labels = corpus.iter().map(|(s, l)| (s.video_id(), l.as_str()));
    io::write_labels(args.output_dir.join(LABELS_FILE), labels)?;
    println!(
        "wrote {} videos ({} classes) to {}",
        corpus.len(),
        spec.class_count,
        args.output_dir.display()
    );
    Ok(())
}

fn fit_gmm(args: FitGmmArgs) -> Result<()> {
    let config = args.config.load()?;
    let sets = read_descriptor_dir(&args.input_dir)?;
    let (pca, gmm) = pipeline::fit_alignment_models(&config, &sets)?;
    std::fs::create_dir_all(&args.output_dir)?;
    io::write_pca(args.output_dir.join(PCA_FILE), &pca)?;
    io::write_spherical_gmm(args.output_dir.join(GMM_FILE), &gmm)?;
    println!(
        "fit {} components over {} projected dimensions from {} videos",
        gmm.component_count(),
        gmm.dim(),
        sets.len()
    );
    Ok(())
}

fn build_words(args: BuildWordsArgs) -> Result<()> {
    let config = args.config.load()?;
    let pca = io::read_pca(args.models_dir.join(PCA_FILE))?;
    let gmm = io::read_spherical_gmm(args.models_dir.join(GMM_FILE))?;
    let sets = read_descriptor_dir(&args.input_dir)?;
    let per_video = pipeline::build_video_words(&config, &pca, &gmm, &sets)?;
    let words: Vec<MidLevelWord> = per_video.into_iter().flatten().collect();
    io::write_words(&args.output, &words)?;
    println!(
        "wrote {} {} words for {} videos to {}",
        words.len(),
        config.word_kind.as_str(),
        sets.len(),
        args.output.display()
    );
    Ok(())
}

fn fit_codebook(args: FitCodebookArgs) -> Result<()> {
    let config = args.config.load()?;
    let words = io::read_words(&args.input)?;
    let model = pipeline::fit_encoder_model(&config, &words)?;
    std::fs::create_dir_all(&args.output_dir)?;
    match &model {
        EncoderModel::Bovw(book) => {
            io::write_codebook(args.output_dir.join(CODEBOOK_FILE), book)?;
            println!("wrote {}-center codebook", book.size());
        }
        EncoderModel::Vlad(book, pca) => {
            io::write_codebook(args.output_dir.join(CODEBOOK_FILE), book)?;
            io::write_pca(args.output_dir.join(WORD_PCA_FILE), pca)?;
            println!(
                "wrote {}-center codebook and {}-dimensional word reduction",
                book.size(),
                pca.output_dim()
            );
        }
        EncoderModel::Fisher(gmm) => {
            io::write_riemannian_gmm(args.output_dir.join(EMBEDDING_GMM_FILE), gmm)?;
            println!(
                "wrote {}-component word-space mixture over {} dimensions",
                gmm.component_count(),
                gmm.projected_dim()
            );
        }
    }
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let config = args.config.load()?;
    let model = match config.encoder {
        EncodingMethod::Bovw => {
            EncoderModel::Bovw(io::read_codebook(args.models_dir.join(CODEBOOK_FILE))?)
        }
        EncodingMethod::Vlad => EncoderModel::Vlad(
            io::read_codebook(args.models_dir.join(CODEBOOK_FILE))?,
            io::read_pca(args.models_dir.join(WORD_PCA_FILE))?,
        ),
        EncodingMethod::FisherVector => EncoderModel::Fisher(io::read_riemannian_gmm(
            args.models_dir.join(EMBEDDING_GMM_FILE),
        )?),
    };
    let words = io::read_words(&args.input)?;
    let videos = group_by_video(words);
    let mut encodings = Vec::with_capacity(videos.len());
    for (_, words) in &videos {
        encodings.push(pipeline::encode_video(&config, &model, words)?);
    }
    io::write_encodings(&args.output, &encodings)?;
    if let Some(text) = &args.text {
        io::export_encodings_text(text, &encodings)?;
    }
    println!(
        "encoded {} videos with {} to {}",
        encodings.len(),
        config.encoder,
        args.output.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let train = io::read_encodings(&args.train)?;
    let test = io::read_encodings(&args.test)?;
    let train_labels = io::read_labels(&args.train_labels)?;
    let test_labels = io::read_labels(&args.test_labels)?;
    let train = pipeline::label_encodings(&train, &train_labels)?;
    let test = pipeline::label_encodings(&test, &test_labels)?;
    let accuracy = pipeline::nearest_centroid_eval(&train, &test)?;
    println!("accuracy {accuracy}");
    Ok(())
}

fn run_all(args: RunAllArgs) -> Result<()> {
    let config = args.config.load()?;
    let train_sets = read_descriptor_dir(&args.train_dir)?;
    let test_sets = read_descriptor_dir(&args.test_dir)?;
    let output = pipeline::run_pipeline(&config, &train_sets, &test_sets)?;
    std::fs::create_dir_all(&args.output_dir)?;
    io::write_encodings(args.output_dir.join("train.mwev"), &output.train)?;
    io::write_encodings(args.output_dir.join("test.mwev"), &output.test)?;
    let manifest = serde_json::to_string_pretty(&output.report)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    std::fs::write(args.output_dir.join("manifest.json"), manifest)?;
    for (stage, ms) in &output.report.stage_timings_ms {
        println!("stage {stage}: {ms} ms");
    }
    println!(
        "encoded {} train and {} test videos to {}",
        output.train.len(),
        output.test.len(),
        args.output_dir.display()
    );

    let train_label_path = args.train_dir.join(LABELS_FILE);
    let test_label_path = args.test_dir.join(LABELS_FILE);
    if train_label_path.is_file() && test_label_path.is_file() {
        let train_labels = io::read_labels(train_label_path)?;
        let test_labels = io::read_labels(test_label_path)?;
        let train = pipeline::label_encodings(&output.train, &train_labels)?;
        let test = pipeline::label_encodings(&output.test, &test_labels)?;
        let accuracy = pipeline::nearest_centroid_eval(&train, &test)?;
        println!("accuracy {accuracy}");
    }
    Ok(())
}

/// All .mwds files under `dir`, read in file-name order.
fn read_descriptor_dir(dir: &Path) -> Result<Vec<DescriptorSet>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "mwds"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty(format!(
            "no .mwds files in {}",
            dir.display()
        )));
    }
    paths.iter().map(io::read_descriptor_set).collect()
}

/// Group a flat word list by video, keeping first-appearance order of the
/// videos and word order within each.
fn group_by_video(words: Vec<MidLevelWord>) -> Vec<(String, Vec<MidLevelWord>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<MidLevelWord>> =
        std::collections::HashMap::new();
    for word in words {
        let id = word.video_id().to_owned();
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(word);
    }
    order
        .into_iter()
        .map(|id| {
            let words = groups.remove(&id).expect("group exists for ordered id");
            (id, words)
        })
        .collect()
}
