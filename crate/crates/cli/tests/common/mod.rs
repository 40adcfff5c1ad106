#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use sketchrefine::corpus::{
    build_index, export_corpus, prior_path, sample_corpus, save_index, save_prior, CorpusItem,
    SpecBounds,
};
use sketchrefine::shape_space::{BuildOptions, ShapeSpaceIndex};
use sketchrefine::structure::SkeletonPrior;

pub const CORPUS_SIZE: usize = 200;
pub const CORPUS_SEED: u64 = 2024;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub items: Vec<CorpusItem>,
    pub index: ShapeSpaceIndex,
    pub prior: SkeletonPrior,
}

impl Fixture {
    pub fn corpus_dir(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }

    pub fn index_path(&self) -> PathBuf {
        self.dir.path().join("model.frix")
    }
}

/// A 200-item synthetic corpus with a d = 64 index, exported to disk once
/// per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let items = sample_corpus(CORPUS_SIZE, CORPUS_SEED, &SpecBounds::default()).unwrap();
        let (index, prior) = build_index(
            &items,
            &BuildOptions {
                dim: 64,
                ..BuildOptions::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture {
            dir,
            items,
            index,
            prior,
        };
        export_corpus(&f.items, &f.corpus_dir()).unwrap();
        save_index(&f.index_path(), &f.index).unwrap();
        save_prior(&prior_path(&f.index_path()), &f.prior).unwrap();
        f
    })
}

pub fn args(parts: &[&str]) -> Vec<String> {
    std::iter::once("sketchrefine")
        .chain(parts.iter().copied())
        .map(String::from)
        .collect()
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}
