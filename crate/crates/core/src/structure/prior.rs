use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::joints::{Bone, FigureKeypoints, BONES, REFERENCE_BONE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoneStat {
    /// Mean of bone length over shoulder width.
    pub mean: f64,
    /// Sample standard deviation of the same ratio.
    pub std: f64,
}

/// Corpus statistics of bone-length-to-shoulder-width ratios.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "PriorFile", into = "PriorFile")]
pub struct SkeletonPrior {
    pub bones: BTreeMap<Bone, BoneStat>,
}

#[derive(Serialize, Deserialize)]
struct PriorEntry {
    #[serde(flatten)]
    bone: Bone,
    mean: f64,
    std: f64,
}

#[derive(Serialize, Deserialize)]
struct PriorFile {
    bones: Vec<PriorEntry>,
}

impl From<PriorFile> for SkeletonPrior {
    fn from(f: PriorFile) -> Self {
        SkeletonPrior {
            bones: f
                .bones
                .into_iter()
                .map(|e| {
                    (
                        e.bone,
                        BoneStat {
                            mean: e.mean,
                            std: e.std,
                        },
                    )
                })
                .collect(),
        }
    }
}

impl From<SkeletonPrior> for PriorFile {
    fn from(p: SkeletonPrior) -> Self {
        PriorFile {
            bones: p
                .bones
                .into_iter()
                .map(|(bone, s)| PriorEntry {
                    bone,
                    mean: s.mean,
                    std: s.std,
                })
                .collect(),
        }
    }
}

impl SkeletonPrior {
    pub fn get(&self, bone: &Bone) -> Option<&BoneStat> {
        self.bones.get(bone)
    }

    /// Bone ratios of a single figure, or `None` if any bone or the
    /// reference is missing.
    pub fn ratios(kps: &FigureKeypoints) -> Option<Result<BTreeMap<Bone, f64>>> {
        let reference = bone_length(kps, &REFERENCE_BONE)?;
        if reference.is_nan() || reference <= 0.0 {
            return Some(Err(Error::DegenerateReference { figure: 0 }));
        }
        let mut out = BTreeMap::new();
        for b in BONES {
            out.insert(b, bone_length(kps, &b)? / reference);
        }
        Some(Ok(out))
    }
}

pub(crate) fn bone_length(kps: &FigureKeypoints, bone: &Bone) -> Option<f64> {
    let part = kps.get(&bone.part)?;
    Some(part.get(bone.from)?.dist(part.get(bone.to)?))
}

/// Per-bone mean and standard deviation of length ratios across figures
/// that carry every bone.
pub fn build_skeleton_prior(figures: &[FigureKeypoints]) -> Result<SkeletonPrior> {
    let mut samples: Vec<BTreeMap<Bone, f64>> = Vec::new();
    for (i, kps) in figures.iter().enumerate() {
        match SkeletonPrior::ratios(kps) {
            Some(Ok(r)) => samples.push(r),
            Some(Err(_)) => return Err(Error::DegenerateReference { figure: i }),
            None => {}
        }
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientCorpus {
            class: None,
            available: samples.len(),
            required: 2,
        });
    }
    let n = samples.len() as f64;
    let mut bones = BTreeMap::new();
    bones.insert(
        REFERENCE_BONE,
        BoneStat {
            mean: 1.0,
            std: 0.0,
        },
    );
    for b in BONES {
        let mean = samples.iter().map(|s| s[&b]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[&b] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        bones.insert(
            b,
            BoneStat {
                mean,
                std: var.sqrt(),
            },
        );
    }
    Ok(SkeletonPrior { bones })
}
