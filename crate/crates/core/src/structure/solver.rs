use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::energy::{EnergyWeights, StructureProblem};
use super::heatmap::{render_heatmaps, HeatmapStack, DEFAULT_SIGMA, DEFAULT_STRIDE};
use super::joints::{FigureKeypoints, REFERENCE_PART};
use super::prior::SkeletonPrior;
use crate::error::{Error, Result};
use crate::figure::{
    crop_to_canvas, warp_mask, warp_raster, Affine2, BinaryMask, BoundingBox, PartLabel,
    PartSketch, CANVAS_SIZE,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub gradient_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 50,
            initial_damping: 1e-3,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureOptions {
    pub steps: usize,
    pub weights: EnergyWeights,
    pub solver: SolverOptions,
    pub sigma: f64,
    pub stride: usize,
    pub canvas_width: usize,
    pub canvas_height: usize,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions {
            steps: 3,
            weights: EnergyWeights::default(),
            solver: SolverOptions::default(),
            sigma: DEFAULT_SIGMA,
            stride: DEFAULT_STRIDE,
            canvas_width: CANVAS_SIZE,
            canvas_height: CANVAS_SIZE,
        }
    }
}

/// Outcome of one damped Gauss-Newton solve.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub theta: DVector<f64>,
    pub energy: f64,
    pub iterations: usize,
}

/// Levenberg-damped Gauss-Newton from `theta = 0`. A step is accepted only
/// if it strictly lowers the energy.
pub fn minimize(problem: &StructureProblem, opts: &SolverOptions) -> Result<Minimum> {
    let n = problem.num_params();
    let mut theta = DVector::zeros(n);
    let mut r = problem.residuals(&theta);
    let mut energy = r.norm_squared();
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    let mut damping = opts.initial_damping;
    let mut iterations = 0;
    while iterations < opts.max_iterations && n > 0 {
        iterations += 1;
        let j = problem.jacobian(&theta);
        let g = j.transpose() * &r;
        if 2.0 * g.norm() < opts.gradient_tolerance {
            break;
        }
        let a = j.transpose() * &j + DMatrix::identity(n, n) * damping;
        let Some(chol) = a.cholesky() else {
            damping *= 10.0;
            continue;
        };
        let candidate = &theta - chol.solve(&g);
        let rc = problem.residuals(&candidate);
        let ec = rc.norm_squared();
        if ec.is_finite() && ec < energy {
            theta = candidate;
            r = rc;
            energy = ec;
            damping /= 10.0;
        } else {
            damping *= 10.0;
        }
    }
    Ok(Minimum {
        theta,
        energy,
        iterations,
    })
}

/// Result of the cascaded structure solve.
#[derive(Clone, Debug)]
pub struct StructureSolution {
    /// Transforms solved at each cascade step, reference part included.
    pub steps: Vec<BTreeMap<PartLabel, Affine2>>,
    /// Composition of all step transforms per part.
    pub totals: BTreeMap<PartLabel, Affine2>,
    pub parts: BTreeMap<PartLabel, PartSketch>,
    pub masks: BTreeMap<PartLabel, BinaryMask>,
    pub keypoints: FigureKeypoints,
    pub heatmaps: BTreeMap<PartLabel, HeatmapStack>,
    /// Energy before the first step followed by the minimised energy of
    /// every step.
    pub energy_trace: Vec<f64>,
}

/// Moves a part crop and mask by a canvas-space transform. The new box
/// encloses the transformed old box; crop contents are resampled once.
pub fn transform_part(
    part: &PartSketch,
    mask: &BinaryMask,
    t: &Affine2,
) -> Result<(PartSketch, BinaryMask)> {
    if *t == Affine2::IDENTITY || part.is_absent() {
        return Ok((part.clone(), mask.clone()));
    }
    t.invert()?;
    let bbox = BoundingBox::enclosing(part.bbox.corners().map(|c| t.apply(c)))
        .ok_or(Error::SingularTransform { det: t.det() })?;
    let old = crop_to_canvas(&part.bbox, part.crop.width());
    let new = crop_to_canvas(&bbox, part.crop.width());
    let forward = new.invert()?.compose(t).compose(&old);
    let crop = warp_raster(
        &part.crop,
        &forward,
        part.crop.width(),
        part.crop.height(),
        0.0,
    )?;
    let mask_forward = new
        .invert()?
        .compose(t)
        .compose(&crop_to_canvas(&part.bbox, mask.width()));
    let mask = warp_mask(mask, &mask_forward, mask.width(), mask.height())?;
    Ok((
        PartSketch {
            label: part.label,
            bbox,
            crop,
        },
        mask,
    ))
}

/// Cascaded per-part affine alignment. Each step solves from identity on the
/// keypoints left by the previous step; the final crops and masks are warped
/// once from the inputs with the composed transforms.
pub fn refine_structure(
    parts: &[(PartSketch, BinaryMask)],
    kps: &FigureKeypoints,
    prior: &SkeletonPrior,
    opts: &StructureOptions,
) -> Result<StructureSolution> {
    if !kps.contains_key(&REFERENCE_PART) {
        return Err(Error::MissingReferencePart);
    }
    if kps
        .values()
        .any(|k| k.joints.values().any(|p| !p.is_finite()))
    {
        return Err(Error::NonFiniteEnergy);
    }
    let mut state = kps.clone();
    let mut totals: BTreeMap<PartLabel, Affine2> =
        state.keys().map(|l| (*l, Affine2::IDENTITY)).collect();
    let mut steps = Vec::with_capacity(opts.steps);
    let mut energy_trace = Vec::with_capacity(opts.steps + 1);

    for step in 0..opts.steps {
        let problem = StructureProblem::new(&state, prior, opts.weights)?;
        if step == 0 {
            let e0 = problem.energy(&DVector::zeros(problem.num_params()));
            if !e0.is_finite() {
                return Err(Error::NonFiniteEnergy);
            }
            energy_trace.push(e0);
        }
        let min = minimize(&problem, &opts.solver)?;
        let mut transforms = problem.transforms(&min.theta);
        for l in state.keys() {
            transforms.entry(*l).or_insert(Affine2::IDENTITY);
        }
        for (l, t) in &transforms {
            if *l == REFERENCE_PART {
                continue;
            }
            if let Some(k) = state.get_mut(l) {
                *k = k.transformed(t);
            }
            let total = totals.entry(*l).or_insert(Affine2::IDENTITY);
            *total = t.compose(total);
        }
        log::debug!(
            "structure step {step}: energy {:.6e} after {} iterations",
            min.energy,
            min.iterations
        );
        energy_trace.push(min.energy);
        steps.push(transforms);
    }

    let mut out_parts = BTreeMap::new();
    let mut out_masks = BTreeMap::new();
    for (part, mask) in parts {
        let t = totals
            .get(&part.label)
            .copied()
            .unwrap_or(Affine2::IDENTITY);
        let (p, m) = transform_part(part, mask, &t)?;
        out_parts.insert(part.label, p);
        out_masks.insert(part.label, m);
    }
    let heatmaps = state
        .iter()
        .map(|(l, k)| {
            (
                *l,
                render_heatmaps(
                    k,
                    opts.sigma,
                    opts.stride,
                    opts.canvas_width,
                    opts.canvas_height,
                ),
            )
        })
        .collect();
    Ok(StructureSolution {
        steps,
        totals,
        parts: out_parts,
        masks: out_masks,
        keypoints: state,
        heatmaps,
        energy_trace,
    })
}
