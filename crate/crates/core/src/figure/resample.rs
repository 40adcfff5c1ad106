//! Resampling between canvas space, part crops and transformed frames.
//!
//! All transforms act on continuous canvas coordinates where pixel `(i, j)`
//! has its centre at `(i + 0.5, j + 0.5)`. Ink is resampled bilinearly;
//! labels and masks use nearest-neighbour lookup so codes never mix.

use super::affine::{Affine2, Point};
use super::label::PartLabel;
use super::raster::{BinaryMask, BoundingBox, ParsingMap, SketchRaster};
use crate::error::Result;

fn pixel_centre(x: usize, y: usize) -> Point {
    Point::new(x as f64 + 0.5, y as f64 + 0.5)
}

/// Backward-mapped bilinear warp: output pixel `p` reads `src` at `t^-1(p)`.
pub fn warp_raster(
    src: &SketchRaster,
    t: &Affine2,
    out_w: usize,
    out_h: usize,
    fill: f64,
) -> Result<SketchRaster> {
    let inv = t.invert()?;
    let fill = fill.clamp(0.0, 1.0);
    let mut out = SketchRaster::blank(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let q = inv.apply(pixel_centre(x, y));
            out.set(x, y, src.sample_bilinear(q.x - 0.5, q.y - 0.5, fill));
        }
    }
    Ok(out)
}

/// Nearest-neighbour warp of a parsing map; out-of-range samples are background.
pub fn warp_labels(
    src: &ParsingMap,
    t: &Affine2,
    out_w: usize,
    out_h: usize,
) -> Result<ParsingMap> {
    let inv = t.invert()?;
    let mut out = ParsingMap::blank(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let q = inv.apply(pixel_centre(x, y));
            let (sx, sy) = (q.x.floor(), q.y.floor());
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < src.width() && (sy as usize) < src.height()
            {
                out.set(x, y, src.label_at(sx as usize, sy as usize));
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour warp of a binary mask.
pub fn warp_mask(src: &BinaryMask, t: &Affine2, out_w: usize, out_h: usize) -> Result<BinaryMask> {
    let inv = t.invert()?;
    let mut out = BinaryMask::empty(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let q = inv.apply(pixel_centre(x, y));
            out.set(
                x,
                y,
                src.get_or_false(q.x.floor() as i64, q.y.floor() as i64),
            );
        }
    }
    Ok(out)
}

/// Maps crop pixel-space (continuous) into canvas space for a `size x size` crop.
pub fn crop_to_canvas(bbox: &BoundingBox, size: usize) -> Affine2 {
    let sx = bbox.width / size as f64;
    let sy = bbox.height / size as f64;
    Affine2::new(sx, 0.0, bbox.x, 0.0, sy, bbox.y)
}

/// Bilinear resample of the `bbox` region into a `size x size` crop. The
/// area outside the canvas reads as blank.
pub fn crop_resample(global: &SketchRaster, bbox: &BoundingBox, size: usize) -> SketchRaster {
    let map = crop_to_canvas(bbox, size);
    let mut out = SketchRaster::blank(size, size);
    for v in 0..size {
        for u in 0..size {
            let q = map.apply(pixel_centre(u, v));
            out.set(u, v, global.sample_bilinear(q.x - 0.5, q.y - 0.5, 0.0));
        }
    }
    out
}

/// Nearest-neighbour crop of one label's binary slice.
pub fn crop_label_mask(
    labels: &ParsingMap,
    label: PartLabel,
    bbox: &BoundingBox,
    size: usize,
) -> BinaryMask {
    let map = crop_to_canvas(bbox, size);
    let code = label.code();
    let mut out = BinaryMask::empty(size, size);
    for v in 0..size {
        for u in 0..size {
            let q = map.apply(pixel_centre(u, v));
            let (sx, sy) = (q.x.floor(), q.y.floor());
            let inside = sx >= 0.0
                && sy >= 0.0
                && (sx as usize) < labels.width()
                && (sy as usize) < labels.height();
            out.set(u, v, inside && labels.get(sx as usize, sy as usize) == code);
        }
    }
    out
}

/// Canvas pixel range whose centres fall inside `bbox`, clipped to the canvas.
fn covered_pixels(
    bbox: &BoundingBox,
    w: usize,
    h: usize,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let span = |lo: f64, len: f64, max: usize| {
        let start = (lo - 0.5).ceil().max(0.0);
        let end = (lo + len - 0.5).ceil().clamp(0.0, max as f64);
        if start >= end {
            0..0
        } else {
            start as usize..end as usize
        }
    };
    (span(bbox.x, bbox.width, w), span(bbox.y, bbox.height, h))
}

/// Writes `crop` back through `bbox` onto `global`, blending ink by maximum.
pub fn paste_crop(global: &mut SketchRaster, crop: &SketchRaster, bbox: &BoundingBox) {
    let (xs, ys) = covered_pixels(bbox, global.width(), global.height());
    let su = crop.width() as f64 / bbox.width;
    let sv = crop.height() as f64 / bbox.height;
    let max_u = (crop.width() - 1) as f64;
    let max_v = (crop.height() - 1) as f64;
    for y in ys {
        let v = ((y as f64 + 0.5 - bbox.y) * sv - 0.5).clamp(0.0, max_v);
        for x in xs.clone() {
            let u = ((x as f64 + 0.5 - bbox.x) * su - 0.5).clamp(0.0, max_u);
            let ink = crop.sample_bilinear(u, v, 0.0);
            if ink > global.get(x, y) {
                global.set(x, y, ink);
            }
        }
    }
}

/// Paints `mask` through `bbox` into `labels`, overwriting only pixels held
/// by a lower-priority label (or background).
pub fn paste_mask(
    labels: &mut ParsingMap,
    mask: &BinaryMask,
    bbox: &BoundingBox,
    label: PartLabel,
) {
    let (xs, ys) = covered_pixels(bbox, labels.width(), labels.height());
    let su = mask.width() as f64 / bbox.width;
    let sv = mask.height() as f64 / bbox.height;
    let priority = label.paint_priority();
    for y in ys {
        let v = ((y as f64 + 0.5 - bbox.y) * sv).floor() as i64;
        for x in xs.clone() {
            let u = ((x as f64 + 0.5 - bbox.x) * su).floor() as i64;
            if !mask.get_or_false(u, v) {
                continue;
            }
            let wins = labels
                .label_at(x, y)
                .map_or(true, |held| held.paint_priority() < priority);
            if wins {
                labels.set(x, y, Some(label));
            }
        }
    }
}
