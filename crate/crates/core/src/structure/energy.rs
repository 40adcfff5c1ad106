//! Structure energy: connectivity of shared joints, bone proportions against
//! the skeleton prior, and a penalty on transform size.
//!
//! Every non-reference part `c` gets six parameters `theta` describing an
//! affine map about its pivot `p_c` (the point where it attaches to its parent
//! part, or its keypoint centroid when the parent is absent):
//!
//! ```text
//! T_c(x) = p_c + (I + [[t0, t1], [t3, t4]]) (x - p_c) + (t2, t5)
//! ```
//!
//! so `theta = 0` is the identity and `|theta|` is the identity distance of
//! `T_c` measured in the pivot frame.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::joints::{FigureKeypoints, REFERENCE_BONE, REFERENCE_PART, SHARED_JOINTS};
use super::prior::{bone_length, SkeletonPrior};
use crate::error::{Error, Result};
use crate::figure::{Affine2, PartLabel, Point};

pub const PARAMS_PER_PART: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    /// Shared-joint connectivity.
    pub connectivity: f64,
    /// Bone-length proportions.
    pub proportion: f64,
    /// Transform-size penalty.
    pub regularization: f64,
    /// Half-width, in prior standard deviations, of the band around each
    /// mean bone ratio inside which proportions cost nothing.
    pub proportion_tolerance: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            connectivity: 100.0,
            proportion: 1.0,
            regularization: 1.0,
            proportion_tolerance: 3.0,
        }
    }
}

/// Weighted energy split by term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub connectivity: f64,
    pub proportion: f64,
    pub regularization: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.connectivity + self.proportion + self.regularization
    }
}

#[derive(Clone, Copy, Debug)]
struct LinkResidual {
    parent: (Option<usize>, Point),
    child: (Option<usize>, Point),
}

#[derive(Clone, Copy, Debug)]
struct BoneResidual {
    var: Option<usize>,
    from: Point,
    to: Point,
    target: f64,
    tolerance: f64,
}

fn dead_band(r: f64, tol: f64) -> f64 {
    if r > tol {
        r - tol
    } else if r < -tol {
        r + tol
    } else {
        0.0
    }
}

/// A fixed configuration of keypoints to be aligned, with one parameter
/// block per non-reference part.
#[derive(Clone, Debug)]
pub struct StructureProblem {
    weights: EnergyWeights,
    vars: Vec<PartLabel>,
    pivots: Vec<Point>,
    links: Vec<LinkResidual>,
    bones: Vec<BoneResidual>,
    reference_length: f64,
}

impl StructureProblem {
    pub fn new(
        kps: &FigureKeypoints,
        prior: &SkeletonPrior,
        weights: EnergyWeights,
    ) -> Result<Self> {
        if !kps.contains_key(&REFERENCE_PART) {
            return Err(Error::MissingReferencePart);
        }
        let vars: Vec<PartLabel> = kps
            .keys()
            .copied()
            .filter(|l| *l != REFERENCE_PART && !kps[l].joints.is_empty())
            .collect();
        let var_of = |l: PartLabel| vars.iter().position(|v| *v == l);

        let pivots = vars
            .iter()
            .map(|&l| {
                let own = &kps[&l];
                let attach: Vec<Point> = SHARED_JOINTS
                    .iter()
                    .filter(|s| {
                        s.child == l && kps.get(&s.parent).and_then(|p| p.get(s.joint)).is_some()
                    })
                    .filter_map(|s| own.get(s.joint))
                    .collect();
                if attach.is_empty() {
                    own.centroid().unwrap()
                } else {
                    attach.iter().fold(Point::default(), |a, p| a + *p)
                        * (1.0 / attach.len() as f64)
                }
            })
            .collect();

        let mut links = Vec::new();
        for s in SHARED_JOINTS {
            let (Some(pa), Some(ch)) = (kps.get(&s.parent), kps.get(&s.child)) else {
                continue;
            };
            let (Some(a), Some(b)) = (pa.get(s.joint), ch.get(s.joint)) else {
                continue;
            };
            links.push(LinkResidual {
                parent: (var_of(s.parent), a),
                child: (var_of(s.child), b),
            });
        }

        let reference_length = bone_length(kps, &REFERENCE_BONE).unwrap_or(0.0);
        let mut bones = Vec::new();
        if reference_length > 0.0 {
            for (bone, stat) in &prior.bones {
                if *bone == REFERENCE_BONE {
                    continue;
                }
                let Some(part) = kps.get(&bone.part) else {
                    continue;
                };
                let (Some(from), Some(to)) = (part.get(bone.from), part.get(bone.to)) else {
                    continue;
                };
                bones.push(BoneResidual {
                    var: var_of(bone.part),
                    from,
                    to,
                    target: stat.mean,
                    tolerance: weights.proportion_tolerance.max(0.0) * stat.std,
                });
            }
        }

        Ok(StructureProblem {
            weights,
            vars,
            pivots,
            links,
            bones,
            reference_length,
        })
    }

    pub fn parts(&self) -> &[PartLabel] {
        &self.vars
    }

    pub fn pivot(&self, part: PartLabel) -> Option<Point> {
        self.vars
            .iter()
            .position(|v| *v == part)
            .map(|i| self.pivots[i])
    }

    pub fn num_params(&self) -> usize {
        self.vars.len() * PARAMS_PER_PART
    }

    pub fn num_residuals(&self) -> usize {
        2 * self.links.len() + self.bones.len() + self.num_params()
    }

    fn block<'a>(&self, theta: &'a DVector<f64>, var: usize) -> &'a [f64] {
        &theta.as_slice()[var * PARAMS_PER_PART..(var + 1) * PARAMS_PER_PART]
    }

    fn map_point(&self, theta: &DVector<f64>, var: Option<usize>, p: Point) -> Point {
        match var {
            None => p,
            Some(v) => {
                let t = self.block(theta, v);
                let d = p - self.pivots[v];
                Point::new(
                    p.x + t[0] * d.x + t[1] * d.y + t[2],
                    p.y + t[3] * d.x + t[4] * d.y + t[5],
                )
            }
        }
    }

    /// Canvas-frame transform of part `var` for parameters `theta`.
    fn transform_of(&self, theta: &DVector<f64>, var: usize) -> Affine2 {
        let t = self.block(theta, var);
        let local = Affine2::new(1.0 + t[0], t[1], t[2], t[3], 1.0 + t[4], t[5]);
        local.about(self.pivots[var])
    }

    pub fn transforms(&self, theta: &DVector<f64>) -> BTreeMap<PartLabel, Affine2> {
        let mut out: BTreeMap<PartLabel, Affine2> = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, l)| (*l, self.transform_of(theta, i)))
            .collect();
        out.insert(REFERENCE_PART, Affine2::IDENTITY);
        out
    }

    /// Parameters reproducing the given canvas-frame transforms (missing
    /// parts default to identity).
    pub fn params_from(&self, transforms: &BTreeMap<PartLabel, Affine2>) -> DVector<f64> {
        let mut theta = DVector::zeros(self.num_params());
        for (i, l) in self.vars.iter().enumerate() {
            if let Some(t) = transforms.get(l) {
                let p = self.pivots[i];
                let local = Affine2::translate(-p.x, -p.y)
                    .compose(t)
                    .compose(&Affine2::translate(p.x, p.y));
                let m = local.m;
                theta.as_mut_slice()[i * 6..i * 6 + 6].copy_from_slice(&[
                    m[0] - 1.0,
                    m[1],
                    m[2],
                    m[3],
                    m[4] - 1.0,
                    m[5],
                ]);
            }
        }
        theta
    }

    /// Connectivity and proportion residuals (unweighted), in a fixed order.
    pub fn geometric_residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut r = Vec::with_capacity(2 * self.links.len() + self.bones.len());
        for link in &self.links {
            let a = self.map_point(theta, link.parent.0, link.parent.1);
            let b = self.map_point(theta, link.child.0, link.child.1);
            r.push(a.x - b.x);
            r.push(a.y - b.y);
        }
        for bone in &self.bones {
            let a = self.map_point(theta, bone.var, bone.from);
            let b = self.map_point(theta, bone.var, bone.to);
            r.push(dead_band(
                a.dist(b) / self.reference_length - bone.target,
                bone.tolerance,
            ));
        }
        DVector::from_vec(r)
    }

    /// Analytic Jacobian of [`geometric_residuals`](Self::geometric_residuals).
    pub fn geometric_jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let rows = 2 * self.links.len() + self.bones.len();
        let mut j = DMatrix::zeros(rows, self.num_params());
        // d(map_point)/d(theta_block) for point p: x row [dx, dy, 1, 0, 0, 0],
        // y row [0, 0, 0, dx, dy, 1]
        let point_jac =
            |j: &mut DMatrix<f64>, row: usize, var: Option<usize>, p: Point, sx: f64, sy: f64| {
                if let Some(v) = var {
                    let d = p - self.pivots[v];
                    let c = v * PARAMS_PER_PART;
                    j[(row, c)] += sx * d.x;
                    j[(row, c + 1)] += sx * d.y;
                    j[(row, c + 2)] += sx;
                    j[(row, c + 3)] += sy * d.x;
                    j[(row, c + 4)] += sy * d.y;
                    j[(row, c + 5)] += sy;
                }
            };
        let mut row = 0;
        for link in &self.links {
            let (va, pa) = link.parent;
            let (vb, pb) = link.child;
            point_jac(&mut j, row, va, pa, 1.0, 0.0);
            point_jac(&mut j, row, vb, pb, -1.0, 0.0);
            point_jac(&mut j, row + 1, va, pa, 0.0, 1.0);
            point_jac(&mut j, row + 1, vb, pb, 0.0, -1.0);
            row += 2;
        }
        for bone in &self.bones {
            let a = self.map_point(theta, bone.var, bone.from);
            let b = self.map_point(theta, bone.var, bone.to);
            let len = a.dist(b);
            let outside = (len / self.reference_length - bone.target).abs() > bone.tolerance;
            if len > 1e-12 && outside {
                let u = (a - b) * (1.0 / (len * self.reference_length));
                point_jac(&mut j, row, bone.var, bone.from, u.x, u.y);
                point_jac(&mut j, row, bone.var, bone.to, -u.x, -u.y);
            }
            row += 1;
        }
        j
    }

    /// Full weighted residual vector `r` with `energy = r . r`.
    pub fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        let geo = self.geometric_residuals(theta);
        let nl = 2 * self.links.len();
        let (wh, wp, wl) = self.sqrt_weights();
        let mut r = DVector::zeros(self.num_residuals());
        for i in 0..geo.len() {
            r[i] = geo[i] * if i < nl { wh } else { wp };
        }
        for k in 0..self.num_params() {
            r[geo.len() + k] = wl * theta[k];
        }
        r
    }

    pub fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let geo = self.geometric_jacobian(theta);
        let nl = 2 * self.links.len();
        let (wh, wp, wl) = self.sqrt_weights();
        let mut j = DMatrix::zeros(self.num_residuals(), self.num_params());
        for r in 0..geo.nrows() {
            let w = if r < nl { wh } else { wp };
            for c in 0..geo.ncols() {
                j[(r, c)] = w * geo[(r, c)];
            }
        }
        for k in 0..self.num_params() {
            j[(geo.nrows() + k, k)] = wl;
        }
        j
    }

    fn sqrt_weights(&self) -> (f64, f64, f64) {
        (
            self.weights.connectivity.max(0.0).sqrt(),
            self.weights.proportion.max(0.0).sqrt(),
            self.weights.regularization.max(0.0).sqrt(),
        )
    }

    pub fn terms(&self, theta: &DVector<f64>) -> EnergyTerms {
        let geo = self.geometric_residuals(theta);
        let nl = 2 * self.links.len();
        let conn: f64 = geo.iter().take(nl).map(|r| r * r).sum();
        let prop: f64 = geo.iter().skip(nl).map(|r| r * r).sum();
        EnergyTerms {
            connectivity: self.weights.connectivity * conn,
            proportion: self.weights.proportion * prop,
            regularization: self.weights.regularization * theta.norm_squared(),
        }
    }

    pub fn energy(&self, theta: &DVector<f64>) -> f64 {
        self.residuals(theta).norm_squared()
    }
}

/// Evaluates the structure energy of `kps` under per-part canvas-frame
/// `transforms`. The reference part's transform, if given, is applied to its
/// keypoints but never penalised.
pub fn structure_energy(
    kps: &FigureKeypoints,
    transforms: &BTreeMap<PartLabel, Affine2>,
    prior: &SkeletonPrior,
    weights: EnergyWeights,
) -> Result<EnergyTerms> {
    let mut base = kps.clone();
    if let (Some(t), Some(k)) = (
        transforms.get(&REFERENCE_PART),
        base.get_mut(&REFERENCE_PART),
    ) {
        *k = k.transformed(t);
    }
    let problem = StructureProblem::new(&base, prior, weights)?;
    let theta = problem.params_from(transforms);
    let terms = problem.terms(&theta);
    if !terms.total().is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    Ok(terms)
}
