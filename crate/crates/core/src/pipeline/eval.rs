use serde::{Deserialize, Serialize};

use crate::corpus::CorpusItem;
use crate::error::{Error, Result};
use crate::figure::Affine2;
use crate::structure::{
    mean_joint_gap, perturb_parts, refine_structure, Magnitude, SkeletonPrior, StructureOptions,
    REFERENCE_PART,
};

/// One perturb-and-recover run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRun {
    pub seed: u64,
    pub item: usize,
    pub pre_gap: f64,
    pub post_gap: f64,
    pub energy_trace: Vec<f64>,
    pub monotone: bool,
    pub reference_identity: bool,
}

/// Joint-gap statistics over a batch of perturb-and-recover runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub seeds: usize,
    pub steps: usize,
    pub magnitude: Magnitude,
    pub mean_pre_gap: f64,
    pub mean_post_gap: f64,
    /// `mean_post_gap / mean_pre_gap`.
    pub ratio: f64,
    pub all_monotone: bool,
    pub reference_identity: bool,
    pub runs: Vec<RecoveryRun>,
}

/// Perturbs every non-reference part of `items[seed % items.len()]` with
/// seed `seed` for each of `seeds` seeds, then re-solves the structure from
/// the perturbed parts and their keypoints.
pub fn evaluate_recovery(
    items: &[CorpusItem],
    prior: &SkeletonPrior,
    seeds: usize,
    magnitude: Magnitude,
    opts: &StructureOptions,
) -> Result<RecoveryReport> {
    if items.is_empty() {
        return Err(Error::InvalidRequest(
            "evaluation needs at least one corpus item".into(),
        ));
    }
    let mut runs = Vec::with_capacity(seeds);
    for seed in 0..seeds as u64 {
        let idx = seed as usize % items.len();
        let item = &items[idx];
        let p = perturb_parts(&item.part_pairs(), &item.keypoints, magnitude, seed)?;
        let pre_gap = mean_joint_gap(&p.keypoints).ok_or(Error::MissingReferencePart)?;
        let sol = refine_structure(&p.parts, &p.keypoints, prior, opts)?;
        let post_gap = mean_joint_gap(&sol.keypoints).ok_or(Error::MissingReferencePart)?;
        let monotone = sol.energy_trace.windows(2).all(|w| w[1] <= w[0]);
        let reference_identity = sol.totals.get(&REFERENCE_PART) == Some(&Affine2::IDENTITY)
            && sol
                .steps
                .iter()
                .all(|s| s.get(&REFERENCE_PART) == Some(&Affine2::IDENTITY));
        log::debug!(
            "seed {seed} item {}: gap {pre_gap:.3} -> {post_gap:.3}",
            item.id
        );
        runs.push(RecoveryRun {
            seed,
            item: item.id,
            pre_gap,
            post_gap,
            energy_trace: sol.energy_trace,
            monotone,
            reference_identity,
        });
    }
    let n = runs.len().max(1) as f64;
    let mean_pre_gap = runs.iter().map(|r| r.pre_gap).sum::<f64>() / n;
    let mean_post_gap = runs.iter().map(|r| r.post_gap).sum::<f64>() / n;
    Ok(RecoveryReport {
        seeds,
        steps: opts.steps,
        magnitude,
        mean_pre_gap,
        mean_post_gap,
        ratio: if mean_pre_gap > 0.0 {
            mean_post_gap / mean_pre_gap
        } else {
            0.0
        },
        all_monotone: runs.iter().all(|r| r.monotone),
        reference_identity: runs.iter().all(|r| r.reference_identity),
        runs,
    })
}
