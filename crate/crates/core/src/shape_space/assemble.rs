use crate::figure::{paste_crop, paste_mask, BinaryMask, ParsingMap, PartSketch, SketchRaster};

/// Pastes every part back onto a `width x height` canvas. Ink blends by
/// per-pixel maximum; overlapping labels resolve by fixed paint priority
/// (Face > Hair > LeftArm > RightArm > TopClothes > LeftLeg > RightLeg >
/// BottomClothes).
pub fn assemble_global<'a, I>(parts: I, width: usize, height: usize) -> (SketchRaster, ParsingMap)
where
    I: IntoIterator<Item = (&'a PartSketch, &'a BinaryMask)>,
{
    let mut sketch = SketchRaster::blank(width, height);
    let mut labels = ParsingMap::blank(width, height);
    for (part, mask) in parts {
        if part.is_absent() && mask.is_empty() {
            continue;
        }
        paste_crop(&mut sketch, &part.crop, &part.bbox);
        paste_mask(&mut labels, mask, &part.bbox, part.label);
    }
    (sketch, labels)
}
