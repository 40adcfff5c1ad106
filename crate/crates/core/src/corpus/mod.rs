//! Training data: a procedural figure generator, ingestion of labelled
//! sketches from disk and persistence of fitted shape-space indices.

mod generator;
mod index_io;
mod item;

pub use generator::{generate_figure, sample_corpus, FigureSpec, Skeleton, SpecBounds};
pub use index_io::{
    decode_index, encode_index, fnv1a64, load_index, load_prior, prior_path, save_index,
    save_prior, FORMAT_VERSION, MAGIC,
};
pub use item::{
    decode_png_gray, encode_png_gray, export_corpus, export_item, ingest_item, item_dir_name,
    keypoints_from_json, keypoints_to_json, labels_from_png, labels_to_png, load_corpus_dir,
    part_crops, sketch_from_png, sketch_to_png, training_crops, CorpusItem, CorpusPart, Provenance,
    BOX_DILATION, INK_REACH, KEYPOINTS_FILE, LABELS_FILE, SKETCH_FILE,
};

use crate::error::Result;
use crate::shape_space::{build_shape_space, BuildOptions, ShapeSpaceIndex};
use crate::structure::{build_skeleton_prior, SkeletonPrior};

/// Fits shape spaces to every part crop and a skeleton prior to every
/// item's keypoints.
pub fn build_index(
    items: &[CorpusItem],
    opts: &BuildOptions,
) -> Result<(ShapeSpaceIndex, SkeletonPrior)> {
    let index = build_shape_space(&training_crops(items), opts)?;
    let figures: Vec<_> = items.iter().map(|i| i.keypoints.clone()).collect();
    let prior = build_skeleton_prior(&figures)?;
    Ok((index, prior))
}
