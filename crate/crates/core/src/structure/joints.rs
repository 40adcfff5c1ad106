use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::figure::{Affine2, PartLabel, Point};

/// The 14-joint skeleton. "Left" means the figure's left limb, drawn on the
/// viewer's left (smaller x).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JointId {
    HeadTop = 0,
    Neck = 1,
    LShoulder = 2,
    RShoulder = 3,
    LElbow = 4,
    RElbow = 5,
    LWrist = 6,
    RWrist = 7,
    LHip = 8,
    RHip = 9,
    LKnee = 10,
    RKnee = 11,
    LAnkle = 12,
    RAnkle = 13,
}

impl JointId {
    pub const ALL: [JointId; 14] = [
        JointId::HeadTop,
        JointId::Neck,
        JointId::LShoulder,
        JointId::RShoulder,
        JointId::LElbow,
        JointId::RElbow,
        JointId::LWrist,
        JointId::RWrist,
        JointId::LHip,
        JointId::RHip,
        JointId::LKnee,
        JointId::RKnee,
        JointId::LAnkle,
        JointId::RAnkle,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub const fn name(self) -> &'static str {
        match self {
            JointId::HeadTop => "HeadTop",
            JointId::Neck => "Neck",
            JointId::LShoulder => "LShoulder",
            JointId::RShoulder => "RShoulder",
            JointId::LElbow => "LElbow",
            JointId::RElbow => "RElbow",
            JointId::LWrist => "LWrist",
            JointId::RWrist => "RWrist",
            JointId::LHip => "LHip",
            JointId::RHip => "RHip",
            JointId::LKnee => "LKnee",
            JointId::RKnee => "RKnee",
            JointId::LAnkle => "LAnkle",
            JointId::RAnkle => "RAnkle",
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JointId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|j| j.name() == s)
            .ok_or_else(|| format!("unknown joint {s:?}"))
    }
}

/// Joints carried by each part, proximal first for limbs.
pub fn part_joints(label: PartLabel) -> &'static [JointId] {
    use JointId::*;
    match label {
        PartLabel::Face => &[HeadTop, Neck],
        PartLabel::Hair => &[HeadTop],
        PartLabel::TopClothes => &[Neck, LShoulder, RShoulder, LHip, RHip],
        PartLabel::LeftArm => &[LShoulder, LElbow, LWrist],
        PartLabel::RightArm => &[RShoulder, RElbow, RWrist],
        PartLabel::BottomClothes => &[LHip, RHip, LKnee, RKnee],
        PartLabel::LeftLeg => &[LKnee, LAnkle],
        PartLabel::RightLeg => &[RKnee, RAnkle],
    }
}

/// A joint predicted by two adjacent parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedJoint {
    pub joint: JointId,
    /// The part nearer the reference in the attachment tree.
    pub parent: PartLabel,
    pub child: PartLabel,
}

pub const SHARED_JOINTS: [SharedJoint; 8] = [
    SharedJoint {
        joint: JointId::Neck,
        parent: PartLabel::TopClothes,
        child: PartLabel::Face,
    },
    SharedJoint {
        joint: JointId::HeadTop,
        parent: PartLabel::Face,
        child: PartLabel::Hair,
    },
    SharedJoint {
        joint: JointId::LShoulder,
        parent: PartLabel::TopClothes,
        child: PartLabel::LeftArm,
    },
    SharedJoint {
        joint: JointId::RShoulder,
        parent: PartLabel::TopClothes,
        child: PartLabel::RightArm,
    },
    SharedJoint {
        joint: JointId::LHip,
        parent: PartLabel::TopClothes,
        child: PartLabel::BottomClothes,
    },
    SharedJoint {
        joint: JointId::RHip,
        parent: PartLabel::TopClothes,
        child: PartLabel::BottomClothes,
    },
    SharedJoint {
        joint: JointId::LKnee,
        parent: PartLabel::BottomClothes,
        child: PartLabel::LeftLeg,
    },
    SharedJoint {
        joint: JointId::RKnee,
        parent: PartLabel::BottomClothes,
        child: PartLabel::RightLeg,
    },
];

/// A limb segment measured by the proportion rule: both joints belong to `part`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bone {
    pub part: PartLabel,
    pub from: JointId,
    pub to: JointId,
}

impl Bone {
    pub const fn new(part: PartLabel, from: JointId, to: JointId) -> Self {
        Bone { part, from, to }
    }

    pub fn name(&self) -> String {
        format!("{}:{}-{}", self.part, self.from, self.to)
    }
}

/// Shoulder width, the length every other bone is measured against.
pub const REFERENCE_BONE: Bone = Bone::new(
    PartLabel::TopClothes,
    JointId::LShoulder,
    JointId::RShoulder,
);

pub const BONES: [Bone; 12] = [
    Bone::new(PartLabel::Face, JointId::HeadTop, JointId::Neck),
    Bone::new(PartLabel::TopClothes, JointId::LShoulder, JointId::LHip),
    Bone::new(PartLabel::TopClothes, JointId::RShoulder, JointId::RHip),
    Bone::new(PartLabel::LeftArm, JointId::LShoulder, JointId::LElbow),
    Bone::new(PartLabel::LeftArm, JointId::LElbow, JointId::LWrist),
    Bone::new(PartLabel::RightArm, JointId::RShoulder, JointId::RElbow),
    Bone::new(PartLabel::RightArm, JointId::RElbow, JointId::RWrist),
    Bone::new(PartLabel::BottomClothes, JointId::LHip, JointId::RHip),
    Bone::new(PartLabel::BottomClothes, JointId::LHip, JointId::LKnee),
    Bone::new(PartLabel::BottomClothes, JointId::RHip, JointId::RKnee),
    Bone::new(PartLabel::LeftLeg, JointId::LKnee, JointId::LAnkle),
    Bone::new(PartLabel::RightLeg, JointId::RKnee, JointId::RAnkle),
];

/// The part every other part is aligned against; never transformed.
pub const REFERENCE_PART: PartLabel = PartLabel::TopClothes;

/// Keypoints of one part in canvas coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartKeypointSet {
    pub label: PartLabel,
    pub joints: BTreeMap<JointId, Point>,
}

impl PartKeypointSet {
    pub fn new(label: PartLabel) -> Self {
        PartKeypointSet {
            label,
            joints: BTreeMap::new(),
        }
    }

    pub fn get(&self, joint: JointId) -> Option<Point> {
        self.joints.get(&joint).copied()
    }

    pub fn with(mut self, joint: JointId, p: Point) -> Self {
        self.joints.insert(joint, p);
        self
    }

    /// All of the part's own joints are present and finite.
    pub fn is_complete(&self) -> bool {
        part_joints(self.label)
            .iter()
            .all(|j| self.get(*j).is_some_and(Point::is_finite))
    }

    pub fn transformed(&self, t: &Affine2) -> Self {
        PartKeypointSet {
            label: self.label,
            joints: self.joints.iter().map(|(j, p)| (*j, t.apply(*p))).collect(),
        }
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.joints.is_empty() {
            return None;
        }
        let n = self.joints.len() as f64;
        let sum = self
            .joints
            .values()
            .fold(Point::default(), |acc, p| acc + *p);
        Some(sum * (1.0 / n))
    }
}

/// Keypoints of a whole figure, one set per present part.
pub type FigureKeypoints = BTreeMap<PartLabel, PartKeypointSet>;

/// Mean distance between the two copies of every shared joint whose parts
/// are both present; `None` when no such pair exists.
pub fn mean_joint_gap(kps: &FigureKeypoints) -> Option<f64> {
    let gaps: Vec<f64> = SHARED_JOINTS
        .iter()
        .filter_map(|s| {
            let a = kps.get(&s.parent)?.get(s.joint)?;
            let b = kps.get(&s.child)?.get(s.joint)?;
            Some(a.dist(b))
        })
        .collect();
    if gaps.is_empty() {
        None
    } else {
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    }
}
