use serde::{Deserialize, Serialize};

use super::knn::knn_query_excluding;
use super::lle::solve_lle_weights;
use super::space::{LatentVector, ShapeSpace, ShapeSpaceIndex};
use crate::error::Result;
use crate::figure::{BinaryMask, PartSketch};

/// Default neighbourhood size for projection.
pub const DEFAULT_K: usize = 10;

/// Outcome of projecting a latent onto its class manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub projected: LatentVector,
    pub neighbor_ids: Vec<usize>,
    /// Sum to one; may be negative.
    pub weights: Vec<f64>,
    /// `|v - sum_k w_k v_k|`.
    pub residual: f64,
}

/// Retrieve-and-interpolate: K nearest corpus latents, LLE weights, and
/// their affine combination.
pub fn project(space: &ShapeSpace, v: &LatentVector, k: usize) -> Result<ProjectionResult> {
    project_excluding(space, v, k, None)
}

/// Projection of corpus sample `id` with itself removed from the candidate
/// set, simulating an unseen input.
pub fn project_leave_one_out(space: &ShapeSpace, id: usize, k: usize) -> Result<ProjectionResult> {
    project_excluding(space, &space.latent(id), k, Some(id))
}

fn project_excluding(
    space: &ShapeSpace,
    v: &LatentVector,
    k: usize,
    exclude: Option<usize>,
) -> Result<ProjectionResult> {
    let ids = knn_query_excluding(&space.latents, &v.coords, k, exclude)?;
    let rows: Vec<Vec<f64>> = ids
        .iter()
        .map(|&i| space.latents.row(i).iter().copied().collect())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let weights = solve_lle_weights(&v.coords, &refs)?;

    let mut projected = vec![0.0; v.dim()];
    for (w, row) in weights.iter().zip(&rows) {
        for (p, x) in projected.iter_mut().zip(row) {
            *p += w * x;
        }
    }
    let projected = LatentVector {
        class: space.class,
        coords: projected,
    };
    let residual = v.dist(&projected);
    Ok(ProjectionResult {
        projected,
        neighbor_ids: ids,
        weights,
        residual,
    })
}

/// A part after geometry refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedPart {
    pub sketch: PartSketch,
    pub mask: BinaryMask,
    /// `None` when the part was absent and bypassed projection.
    pub projection: Option<ProjectionResult>,
}

/// Encode, project and decode one part. Absent parts pass through untouched
/// with an empty mask.
pub fn refine_part(index: &ShapeSpaceIndex, part: &PartSketch, k: usize) -> Result<RefinedPart> {
    let size = part.crop.width();
    if part.is_absent() {
        return Ok(RefinedPart {
            sketch: part.clone(),
            mask: BinaryMask::empty(size, part.crop.height()),
            projection: None,
        });
    }
    let space = index.space_for(part.label)?;
    let v = space.encode(part.label, &part.crop)?;
    let projection = project(space, &v, k)?;
    let crop = space.decode_sketch(part.label, &projection.projected)?;
    let mask = space.decode_mask(part.label, &projection.projected)?;
    Ok(RefinedPart {
        sketch: PartSketch {
            label: part.label,
            bbox: part.bbox,
            crop,
        },
        mask,
        projection: Some(projection),
    })
}
