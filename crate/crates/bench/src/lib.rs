//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchrefine::corpus::{build_index, sample_corpus, CorpusItem, SpecBounds};
use sketchrefine::shape_space::{BuildOptions, ShapeSpaceIndex};
use sketchrefine::structure::SkeletonPrior;

pub struct BenchModel {
    pub items: Vec<CorpusItem>,
    pub index: ShapeSpaceIndex,
    pub prior: SkeletonPrior,
}

/// Synthetic corpus of `n` items and its index at latent dimension `d`.
pub fn model(n: usize, d: usize) -> BenchModel {
    let items = sample_corpus(n, 99, &SpecBounds::default()).expect("corpus");
    let (index, prior) = build_index(
        &items,
        &BuildOptions {
            dim: d,
            ..BuildOptions::default()
        },
    )
    .expect("index");
    BenchModel {
        items,
        index,
        prior,
    }
}

/// A query point and `k` neighbours in `d` dimensions.
pub fn lle_instance(d: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ns = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (q, ns)
}
