use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the eight semantic body parts. Codes are stable: `0` is reserved
/// for background in parsing maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartLabel {
    Hair = 1,
    Face = 2,
    TopClothes = 3,
    BottomClothes = 4,
    LeftArm = 5,
    RightArm = 6,
    LeftLeg = 7,
    RightLeg = 8,
}

/// Shape spaces are shared between mirrored limbs, leaving six classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    Hair = 0,
    Face = 1,
    TopClothes = 2,
    BottomClothes = 3,
    Arm = 4,
    Leg = 5,
}

impl PartLabel {
    pub const ALL: [PartLabel; 8] = [
        PartLabel::Hair,
        PartLabel::Face,
        PartLabel::TopClothes,
        PartLabel::BottomClothes,
        PartLabel::LeftArm,
        PartLabel::RightArm,
        PartLabel::LeftLeg,
        PartLabel::RightLeg,
    ];

    /// Overlap resolution order for parsing maps, lowest priority first.
    pub const PAINT_ORDER: [PartLabel; 8] = [
        PartLabel::BottomClothes,
        PartLabel::RightLeg,
        PartLabel::LeftLeg,
        PartLabel::TopClothes,
        PartLabel::RightArm,
        PartLabel::LeftArm,
        PartLabel::Hair,
        PartLabel::Face,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<PartLabel> {
        match code {
            1..=8 => Some(Self::ALL[code as usize - 1]),
            _ => None,
        }
    }

    pub const fn shape_class(self) -> ShapeClass {
        match self {
            PartLabel::Hair => ShapeClass::Hair,
            PartLabel::Face => ShapeClass::Face,
            PartLabel::TopClothes => ShapeClass::TopClothes,
            PartLabel::BottomClothes => ShapeClass::BottomClothes,
            PartLabel::LeftArm | PartLabel::RightArm => ShapeClass::Arm,
            PartLabel::LeftLeg | PartLabel::RightLeg => ShapeClass::Leg,
        }
    }

    /// Right-side limbs are mirrored horizontally into their shared class.
    pub const fn is_mirrored(self) -> bool {
        matches!(self, PartLabel::RightArm | PartLabel::RightLeg)
    }

    /// Position in [`PAINT_ORDER`](Self::PAINT_ORDER); higher wins.
    pub fn paint_priority(self) -> usize {
        Self::PAINT_ORDER.iter().position(|&l| l == self).unwrap()
    }

    pub const fn name(self) -> &'static str {
        match self {
            PartLabel::Hair => "Hair",
            PartLabel::Face => "Face",
            PartLabel::TopClothes => "TopClothes",
            PartLabel::BottomClothes => "BottomClothes",
            PartLabel::LeftArm => "LeftArm",
            PartLabel::RightArm => "RightArm",
            PartLabel::LeftLeg => "LeftLeg",
            PartLabel::RightLeg => "RightLeg",
        }
    }
}

impl fmt::Display for PartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown part label {s:?}"))
    }
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Hair,
        ShapeClass::Face,
        ShapeClass::TopClothes,
        ShapeClass::BottomClothes,
        ShapeClass::Arm,
        ShapeClass::Leg,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<ShapeClass> {
        Self::ALL.get(code as usize).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            ShapeClass::Hair => "Hair",
            ShapeClass::Face => "Face",
            ShapeClass::TopClothes => "TopClothes",
            ShapeClass::BottomClothes => "BottomClothes",
            ShapeClass::Arm => "Arm",
            ShapeClass::Leg => "Leg",
        }
    }
}
