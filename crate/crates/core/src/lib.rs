pub mod corpus;
pub mod error;
pub mod figure;
pub mod pipeline;
pub mod shape_space;
pub mod structure;

pub use error::{Error, Result};

pub use corpus::{
    build_index, generate_figure, ingest_item, load_index, sample_corpus, save_index, CorpusItem,
};
pub use figure::{
    Affine2, BinaryMask, BoundingBox, ParsingMap, PartLabel, PartSketch, Point, ShapeClass,
    SketchRaster,
};
pub use pipeline::{
    run_pipeline, run_pipeline_raw, run_project, RefineOptions, RefineRequest, RefineResponse,
};
pub use shape_space::{
    build_shape_space, project, refine_part, ProjectionResult, ShapeSpace, ShapeSpaceIndex,
};
pub use structure::{
    refine_structure, structure_energy, EnergyWeights, FigureKeypoints, SkeletonPrior,
};
