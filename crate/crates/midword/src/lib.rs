//! Mid-level word construction and Riemannian-manifold encoding for sets of
//! local descriptors.
//!
//! The crate turns a set of descriptor vectors per video into a fixed-length
//! representation in four stages: global alignment (PCA plus a spherical
//! Gaussian mixture whose components group descriptors across videos),
//! mid-level word modeling (a subspace, covariance, or Gaussian embedded as
//! an SPD matrix per group), intrinsic codebook learning on the resulting
//! manifold (Karcher-mean clustering or a Gaussian mixture in an embedded
//! vector space), and encoding against that codebook (bag-of-words, VLAD, or
//! Fisher vectors). The [`pipeline`] module chains the stages; the other
//! modules are usable on their own.

pub mod alignment;
pub mod codebook;
pub mod encoding;
pub mod error;
pub mod io;
mod linalg;
pub mod manifold;
pub mod pipeline;
pub mod words;

#[cfg(test)]
pub(crate) mod testutil;

pub use alignment::{DescriptorSet, PcaProjection, SphericalGmm};
pub use codebook::{KarcherCodebook, RiemannianGmm};
pub use encoding::{EncodedVideo, EncodingMethod, FisherVariant};
pub use error::{Error, Result};
pub use manifold::{GrassmannPoint, SymPosDef};
pub use pipeline::{PipelineConfig, SyntheticSpec};
pub use words::{MidLevelWord, WordKind};
