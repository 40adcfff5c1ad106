use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::joints::{FigureKeypoints, REFERENCE_PART};
use super::solver::transform_part;
use crate::error::Result;
use crate::figure::{Affine2, BinaryMask, PartLabel, PartSketch, Point};

/// Upper bounds of a random per-part affine perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Magnitude {
    /// Pixels, per axis.
    pub translate: f64,
    /// Degrees.
    pub rotate_deg: f64,
    /// Fraction; the scale factor lies in `[1 - s, 1 + s]`.
    pub scale: f64,
    /// Fraction, per shear axis.
    pub shear: f64,
}

impl Magnitude {
    pub const ZERO: Magnitude = Magnitude {
        translate: 0.0,
        rotate_deg: 0.0,
        scale: 0.0,
        shear: 0.0,
    };
}

impl Default for Magnitude {
    fn default() -> Self {
        Magnitude {
            translate: 10.0,
            rotate_deg: 15.0,
            scale: 0.1,
            shear: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    pub parts: Vec<(PartSketch, BinaryMask)>,
    pub keypoints: FigureKeypoints,
    pub transforms: BTreeMap<PartLabel, Affine2>,
}

fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    let u: f64 = rng.random();
    -bound + 2.0 * bound * u
}

/// Draws one random transform per non-reference part (in label order) and
/// applies it to crops, masks and keypoints. Rotation, scale and shear act
/// about the part's keypoint centroid, falling back to its box centre.
pub fn perturb_parts(
    parts: &[(PartSketch, BinaryMask)],
    kps: &FigureKeypoints,
    magnitude: Magnitude,
    seed: u64,
) -> Result<Perturbation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<PartLabel> = parts
        .iter()
        .map(|(p, _)| p.label)
        .chain(kps.keys().copied())
        .collect();
    labels.sort();
    labels.dedup();

    let mut transforms = BTreeMap::new();
    for l in labels {
        if l == REFERENCE_PART {
            transforms.insert(l, Affine2::IDENTITY);
            continue;
        }
        let tx = uniform(&mut rng, magnitude.translate);
        let ty = uniform(&mut rng, magnitude.translate);
        let angle = uniform(&mut rng, magnitude.rotate_deg).to_radians();
        let s = 1.0 + uniform(&mut rng, magnitude.scale);
        let kx = uniform(&mut rng, magnitude.shear);
        let ky = uniform(&mut rng, magnitude.shear);
        if magnitude == Magnitude::ZERO {
            transforms.insert(l, Affine2::IDENTITY);
            continue;
        }
        let centre = kps.get(&l).and_then(|k| k.centroid()).unwrap_or_else(|| {
            parts
                .iter()
                .find(|(p, _)| p.label == l)
                .map(|(p, _)| {
                    Point::new(
                        p.bbox.x + 0.5 * p.bbox.width,
                        p.bbox.y + 0.5 * p.bbox.height,
                    )
                })
                .unwrap_or_default()
        });
        let linear = Affine2::rotate(angle)
            .compose(&Affine2::scale(s))
            .compose(&Affine2::shear(kx, ky));
        transforms.insert(l, Affine2::translate(tx, ty).compose(&linear.about(centre)));
    }

    let mut out_parts = Vec::with_capacity(parts.len());
    for (p, m) in parts {
        out_parts.push(transform_part(p, m, &transforms[&p.label])?);
    }
    let keypoints = kps
        .iter()
        .map(|(l, k)| {
            let t = transforms[l];
            (
                *l,
                if t == Affine2::IDENTITY {
                    k.clone()
                } else {
                    k.transformed(&t)
                },
            )
        })
        .collect();
    Ok(Perturbation {
        parts: out_parts,
        keypoints,
        transforms,
    })
}
