//! Geometry refinement: per-class linear shape spaces built from a part
//! corpus, and manifold projection of a drawn part by nearest-neighbour
//! retrieval followed by sum-to-one least-squares interpolation.
//!
//! A part crop `x` is encoded as `v = B^T (x - mean)`. Its `K` nearest corpus
//! latents are blended with weights `w` minimising `|v - sum w_k v_k|` under
//! `sum w_k = 1`, and the blend is decoded back to a crop and a mask.

mod assemble;
mod knn;
mod lle;
mod project;
mod space;

pub use assemble::assemble_global;
pub use knn::{knn_query, knn_query_excluding};
pub use lle::{
    regularizer as gram_regularizer, solve_lle_weights, GRAM_FLOOR, GRAM_REGULARIZATION,
};
pub use project::{
    project, project_leave_one_out, refine_part, ProjectionResult, RefinedPart, DEFAULT_K,
};
pub use space::{
    build_shape_space, BuildOptions, LatentVector, ShapeSpace, ShapeSpaceIndex, TrainingCrop,
    DEFAULT_LATENT_DIM, MASK_RIDGE,
};
