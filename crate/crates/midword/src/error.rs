use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every module in the crate.
///
/// Variants are grouped by how a caller should react: configuration mistakes,
/// bad or insufficient input data, I/O and format problems, and numerical
/// failures that depend on the values rather than the shapes involved.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("not enough features: {0}")]
    InsufficientFeatures(String),

    #[error("mixed manifold kinds: {0}")]
    KindMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("log map undefined at the cut locus: {0}")]
    CutLocus(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Prefixes the message with the pipeline stage that produced the error.
    /// I/O errors keep their variant untouched; they already name the file.
    pub fn in_stage(self, stage: &str) -> Error {
        use Error::*;
        let tag = |msg: String| format!("{stage}: {msg}");
        match self {
            Config(m) => Config(tag(m)),
            InvalidInput(m) => InvalidInput(tag(m)),
            DimensionMismatch(m) => DimensionMismatch(tag(m)),
            Empty(m) => Empty(tag(m)),
            TooFewSamples(m) => TooFewSamples(tag(m)),
            InsufficientFeatures(m) => InsufficientFeatures(tag(m)),
            KindMismatch(m) => KindMismatch(tag(m)),
            Io(e) => Io(e),
            Format(m) => Format(tag(m)),
            NotPositiveDefinite(m) => NotPositiveDefinite(tag(m)),
            CutLocus(m) => CutLocus(tag(m)),
            RankDeficient(m) => RankDeficient(tag(m)),
            Degenerate(m) => Degenerate(tag(m)),
        }
    }

    /// Process exit code used by the command-line front end: 2 for
    /// configuration errors, 3 for data errors, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) => 2,
            InvalidInput(_) | DimensionMismatch(_) | Empty(_) | TooFewSamples(_)
            | InsufficientFeatures(_) | KindMismatch(_) | Io(_) | Format(_) => 3,
            NotPositiveDefinite(_) | CutLocus(_) | RankDeficient(_) | Degenerate(_) => 4,
        }
    }
}
