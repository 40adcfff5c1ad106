//! Geometric and raster vocabulary shared by every stage: part labels,
//! ink rasters, parsing maps, boxes and 2D affine algebra.

mod affine;
mod label;
mod raster;
mod resample;

pub use affine::{Affine2, Point, SINGULAR_DET};
pub use label::{PartLabel, ShapeClass};
pub use raster::{
    BinaryMask, BoundingBox, ParsingMap, PartSketch, SketchRaster, CANVAS_SIZE, PART_SIZE,
};
pub use resample::{
    crop_label_mask, crop_resample, crop_to_canvas, paste_crop, paste_mask, warp_labels, warp_mask,
    warp_raster,
};
