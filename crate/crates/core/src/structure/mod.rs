//! Structure refinement: per-part keypoints, Gaussian heatmaps, a skeleton
//! prior over bone proportions and a cascaded per-part affine solve that
//! reconnects shared joints while holding the top clothes fixed.

mod energy;
mod heatmap;
mod joints;
mod keypoints;
mod perturb;
mod prior;
mod solver;

pub use energy::{structure_energy, EnergyTerms, EnergyWeights, StructureProblem, PARAMS_PER_PART};
pub use heatmap::{
    heatmap_argmax, render_heatmaps, Heatmap, HeatmapStack, DEFAULT_SIGMA, DEFAULT_STRIDE,
};
pub use joints::{
    mean_joint_gap, part_joints, Bone, FigureKeypoints, JointId, PartKeypointSet, SharedJoint,
    BONES, REFERENCE_BONE, REFERENCE_PART, SHARED_JOINTS,
};
pub use keypoints::{extract_figure_keypoints, extract_keypoints};
pub use perturb::{perturb_parts, Magnitude, Perturbation};
pub use prior::{build_skeleton_prior, BoneStat, SkeletonPrior};
pub use solver::{
    minimize, refine_structure, transform_part, Minimum, SolverOptions, StructureOptions,
    StructureSolution,
};
