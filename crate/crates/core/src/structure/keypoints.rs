//! Geometric keypoint extraction from part masks.

use nalgebra::{Matrix2, SymmetricEigen};

use super::joints::{FigureKeypoints, JointId, PartKeypointSet};
use crate::error::{Error, Result};
use crate::figure::{crop_to_canvas, BinaryMask, BoundingBox, PartLabel, Point};

const LIMB_LOW_PERCENTILE: f64 = 0.02;
const LIMB_HIGH_PERCENTILE: f64 = 0.98;
const CORNER_INSET: f64 = 0.1;

/// Foreground pixel centres of a crop mask, mapped to canvas coordinates.
fn foreground_points(mask: &BinaryMask, bbox: &BoundingBox) -> Vec<Point> {
    let map = crop_to_canvas(bbox, mask.width());
    let mut pts = Vec::new();
    for v in 0..mask.height() {
        for u in 0..mask.width() {
            if mask.get(u, v) {
                pts.push(map.apply(Point::new(u as f64 + 0.5, v as f64 + 0.5)));
            }
        }
    }
    pts
}

/// Linear-interpolation percentile of a sorted slice, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Ends of the principal-axis segment through the foreground (2nd and 98th
/// percentile of projections), plus the centroid.
pub(crate) fn principal_segment(points: &[Point]) -> (Point, Point, Point) {
    let n = points.len() as f64;
    let c = points.iter().fold(Point::default(), |a, p| a + *p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let eig = SymmetricEigen::new(Matrix2::new(sxx, sxy, sxy, syy));
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        0
    } else {
        1
    };
    let mut axis = Point::new(eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)]);
    if axis.norm() == 0.0 || !axis.is_finite() {
        axis = Point::new(0.0, 1.0);
    }
    let mut t: Vec<f64> = points
        .iter()
        .map(|p| (*p - c).x * axis.x + (*p - c).y * axis.y)
        .collect();
    t.sort_by(f64::total_cmp);
    let lo = percentile(&t, LIMB_LOW_PERCENTILE);
    let hi = percentile(&t, LIMB_HIGH_PERCENTILE);
    (c + axis * lo, c + axis * hi, c)
}

/// Keypoints of one part from its mask crop.
///
/// Limbs use the principal axis of the foreground: the end nearer `anchor`
/// (the matching torso shoulder or hip, when known; otherwise the upper end)
/// is the proximal joint and the centroid is the elbow. Torso, bottom clothes,
/// face and hair read joints off the foreground's tight bounding box.
pub fn extract_keypoints(
    mask: &BinaryMask,
    label: PartLabel,
    bbox: &BoundingBox,
    anchor: Option<Point>,
) -> Result<PartKeypointSet> {
    let pts = foreground_points(mask, bbox);
    if pts.is_empty() {
        return Err(Error::EmptyMask(label));
    }
    let kp = PartKeypointSet::new(label);
    use JointId::*;
    Ok(match label {
        PartLabel::LeftArm | PartLabel::RightArm | PartLabel::LeftLeg | PartLabel::RightLeg => {
            let (a, b, centroid) = principal_segment(&pts);
            let a_first = match anchor {
                Some(k) => a.dist(k) <= b.dist(k),
                None => a.y < b.y || (a.y == b.y && a.x <= b.x),
            };
            let (prox, dist) = if a_first { (a, b) } else { (b, a) };
            match label {
                PartLabel::LeftArm => kp
                    .with(LShoulder, prox)
                    .with(LElbow, centroid)
                    .with(LWrist, dist),
                PartLabel::RightArm => kp
                    .with(RShoulder, prox)
                    .with(RElbow, centroid)
                    .with(RWrist, dist),
                PartLabel::LeftLeg => kp.with(LKnee, prox).with(LAnkle, dist),
                _ => kp.with(RKnee, prox).with(RAnkle, dist),
            }
        }
        _ => {
            let x0 = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            let x1 = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            let top = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
            let bottom = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
            let w = x1 - x0;
            let mid = x0 + 0.5 * w;
            let inset = CORNER_INSET * w;
            match label {
                PartLabel::TopClothes => kp
                    .with(Neck, Point::new(mid, top))
                    .with(LShoulder, Point::new(x0 + inset, top))
                    .with(RShoulder, Point::new(x1 - inset, top))
                    .with(LHip, Point::new(x0 + inset, bottom))
                    .with(RHip, Point::new(x1 - inset, bottom)),
                PartLabel::BottomClothes => kp
                    .with(LHip, Point::new(x0 + inset, top))
                    .with(RHip, Point::new(x1 - inset, top))
                    .with(LKnee, Point::new(x0 + inset, bottom))
                    .with(RKnee, Point::new(x1 - inset, bottom)),
                PartLabel::Face => kp
                    .with(HeadTop, Point::new(mid, top))
                    .with(Neck, Point::new(mid, bottom)),
                _ => kp.with(HeadTop, Point::new(mid, top)),
            }
        }
    })
}

/// Extracts keypoints for every part with a non-empty mask, torso first so
/// limbs can orient themselves against its shoulders and hips.
pub fn extract_figure_keypoints<'a, I>(parts: I) -> Result<FigureKeypoints>
where
    I: IntoIterator<Item = (PartLabel, &'a BoundingBox, &'a BinaryMask)>,
{
    let mut parts: Vec<_> = parts
        .into_iter()
        .filter(|(_, _, m)| !m.is_empty())
        .collect();
    let order = |l: PartLabel| match l {
        PartLabel::TopClothes => 0,
        PartLabel::BottomClothes => 1,
        _ => 2,
    };
    parts.sort_by_key(|(l, _, _)| (order(*l), *l));
    let mut out = FigureKeypoints::new();
    for (label, bbox, mask) in parts {
        let torso = out.get(&PartLabel::TopClothes);
        let bottom = out.get(&PartLabel::BottomClothes);
        let anchor = match label {
            PartLabel::LeftArm => torso.and_then(|k| k.get(JointId::LShoulder)),
            PartLabel::RightArm => torso.and_then(|k| k.get(JointId::RShoulder)),
            PartLabel::LeftLeg => bottom
                .and_then(|k| k.get(JointId::LKnee))
                .or_else(|| torso.and_then(|k| k.get(JointId::LHip))),
            PartLabel::RightLeg => bottom
                .and_then(|k| k.get(JointId::RKnee))
                .or_else(|| torso.and_then(|k| k.get(JointId::RHip))),
            _ => None,
        };
        let kp = extract_keypoints(mask, label, bbox, anchor)?;
        out.insert(label, kp);
    }
    Ok(out)
}
