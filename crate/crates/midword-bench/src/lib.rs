//! Seeded generators shared by the benchmarks.

use midword::manifold::{GrassmannPoint, SymPosDef};
use midword::pipeline::{generate_synthetic, SyntheticSpec};
use midword::alignment::DescriptorSet;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> SymPosDef {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    SymPosDef::new(&a * a.transpose() + DMatrix::identity(dim, dim) * dim as f64 * 0.1)
        .expect("shifted Gram matrix is positive definite")
}

pub fn random_grassmann(d: usize, r: usize, rng: &mut ChaCha8Rng) -> GrassmannPoint {
    let a = DMatrix::from_fn(d, r, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q().columns(0, r).into_owned();
    GrassmannPoint::new(q).expect("orthonormalized basis")
}

/// Small two-class corpus for end-to-end benchmarks.
pub fn bench_corpus(videos_per_class: usize, features: usize, dim: usize) -> Vec<DescriptorSet> {
    let spec = SyntheticSpec {
        class_count: 2,
        videos_per_class,
        features_per_video: features,
        descriptor_dim: dim,
        cluster_count: 2,
        center_spread: 3.0,
        covariance_only: false,
        class_seed: 0,
        seed: 97,
    };
    generate_synthetic(&spec)
        .expect("valid spec")
        .into_iter()
        .map(|(set, _)| set)
        .collect()
}
