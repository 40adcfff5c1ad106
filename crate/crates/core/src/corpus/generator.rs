//! Procedural articulated figures with exact masks and keypoints.
//!
//! Every part is an implicit shape (signed distance, negative inside). Its
//! contour is stroked 1.5 px wide and its interior plus stroke is painted
//! into the parsing map in assembly priority; a part's ink is hidden where a
//! higher-priority part owns the pixel.
//!
//! Angle conventions (degrees, each side independent, index 0 is the
//! viewer-left side):
//!
//! | field            | meaning                                      | limits     |
//! |------------------|----------------------------------------------|------------|
//! | `shoulder_angle` | upper arm raised sideways from hanging       | 0 to 90    |
//! | `elbow_angle`    | forearm folded towards the body              | 0 to 150   |
//! | `hip_angle`      | thigh spread sideways                        | 0 to 30    |
//! | `knee_angle`     | shank turned outwards (negative: inwards)    | -30 to 30  |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::item::{part_crops, CorpusItem, Provenance};
use crate::error::{Error, Result};
use crate::figure::{ParsingMap, PartLabel, Point, SketchRaster, CANVAS_SIZE, PART_SIZE};
use crate::structure::{FigureKeypoints, JointId, PartKeypointSet};

const STROKE_HALF_WIDTH: f64 = 0.75;
const NECK_Y: f64 = 64.0;
const NOISE_TERMS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub seed: u64,
    pub shoulder_angle: [f64; 2],
    pub elbow_angle: [f64; 2],
    pub hip_angle: [f64; 2],
    pub knee_angle: [f64; 2],
    pub upper_arm_length: f64,
    pub forearm_length: f64,
    pub arm_width: f64,
    pub shank_length: f64,
    pub leg_width: f64,
    pub shoulder_width: f64,
    pub hip_width: f64,
    pub torso_height: f64,
    pub head_radius: f64,
    pub hair_thickness: f64,
    /// Hip to knee, the length of the bottom clothes.
    pub hemline_length: f64,
    /// Offset of the neck from its default canvas position.
    pub translation: [f64; 2],
    /// Amplitude of the smooth contour displacement, pixels.
    pub jitter: f64,
}

impl Default for FigureSpec {
    fn default() -> Self {
        FigureSpec {
            seed: 0,
            shoulder_angle: [20.0, 20.0],
            elbow_angle: [15.0, 15.0],
            hip_angle: [8.0, 8.0],
            knee_angle: [0.0, 0.0],
            upper_arm_length: 34.0,
            forearm_length: 32.0,
            arm_width: 10.0,
            shank_length: 48.0,
            leg_width: 12.0,
            shoulder_width: 52.0,
            hip_width: 40.0,
            torso_height: 68.0,
            head_radius: 14.0,
            hair_thickness: 5.0,
            hemline_length: 44.0,
            translation: [0.0, 0.0],
            jitter: 0.0,
        }
    }
}

/// Closed interval per spec field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecBounds {
    pub shoulder_angle: (f64, f64),
    pub elbow_angle: (f64, f64),
    pub hip_angle: (f64, f64),
    pub knee_angle: (f64, f64),
    pub upper_arm_length: (f64, f64),
    pub forearm_length: (f64, f64),
    pub arm_width: (f64, f64),
    pub shank_length: (f64, f64),
    pub leg_width: (f64, f64),
    pub shoulder_width: (f64, f64),
    pub hip_width: (f64, f64),
    pub torso_height: (f64, f64),
    pub head_radius: (f64, f64),
    pub hair_thickness: (f64, f64),
    pub hemline_length: (f64, f64),
    pub translation: (f64, f64),
    pub jitter: (f64, f64),
}

impl SpecBounds {
    /// Hard limits accepted by [`generate_figure`].
    pub const LIMITS: SpecBounds = SpecBounds {
        shoulder_angle: (0.0, 90.0),
        elbow_angle: (0.0, 150.0),
        hip_angle: (0.0, 30.0),
        knee_angle: (-30.0, 30.0),
        upper_arm_length: (15.0, 45.0),
        forearm_length: (15.0, 45.0),
        arm_width: (4.0, 16.0),
        shank_length: (20.0, 60.0),
        leg_width: (4.0, 20.0),
        shoulder_width: (30.0, 80.0),
        hip_width: (20.0, 70.0),
        torso_height: (40.0, 80.0),
        head_radius: (8.0, 20.0),
        hair_thickness: (1.0, 8.0),
        hemline_length: (20.0, 55.0),
        translation: (-12.0, 12.0),
        jitter: (0.0, 2.0),
    };

    fn fields(&self) -> [(&'static str, (f64, f64)); 17] {
        [
            ("shoulder_angle", self.shoulder_angle),
            ("elbow_angle", self.elbow_angle),
            ("hip_angle", self.hip_angle),
            ("knee_angle", self.knee_angle),
            ("upper_arm_length", self.upper_arm_length),
            ("forearm_length", self.forearm_length),
            ("arm_width", self.arm_width),
            ("shank_length", self.shank_length),
            ("leg_width", self.leg_width),
            ("shoulder_width", self.shoulder_width),
            ("hip_width", self.hip_width),
            ("torso_height", self.torso_height),
            ("head_radius", self.head_radius),
            ("hair_thickness", self.hair_thickness),
            ("hemline_length", self.hemline_length),
            ("translation", self.translation),
            ("jitter", self.jitter),
        ]
    }

    /// Draws a spec uniformly inside the bounds, fields in declaration order,
    /// left before right.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> FigureSpec {
        let mut draw = |(lo, hi): (f64, f64)| -> f64 {
            let u: f64 = rng.random();
            lo + (hi - lo) * u
        };
        let mut spec = FigureSpec {
            seed: 0,
            shoulder_angle: [draw(self.shoulder_angle), draw(self.shoulder_angle)],
            elbow_angle: [draw(self.elbow_angle), draw(self.elbow_angle)],
            hip_angle: [draw(self.hip_angle), draw(self.hip_angle)],
            knee_angle: [draw(self.knee_angle), draw(self.knee_angle)],
            upper_arm_length: draw(self.upper_arm_length),
            forearm_length: draw(self.forearm_length),
            arm_width: draw(self.arm_width),
            shank_length: draw(self.shank_length),
            leg_width: draw(self.leg_width),
            shoulder_width: draw(self.shoulder_width),
            hip_width: draw(self.hip_width),
            torso_height: draw(self.torso_height),
            head_radius: draw(self.head_radius),
            hair_thickness: draw(self.hair_thickness),
            hemline_length: draw(self.hemline_length),
            translation: [draw(self.translation), draw(self.translation)],
            jitter: draw(self.jitter),
        };
        spec.seed = rng.random();
        spec
    }
}

impl Default for SpecBounds {
    fn default() -> Self {
        SpecBounds {
            shoulder_angle: (5.0, 50.0),
            elbow_angle: (0.0, 60.0),
            hip_angle: (2.0, 15.0),
            knee_angle: (-8.0, 8.0),
            upper_arm_length: (28.0, 38.0),
            forearm_length: (26.0, 34.0),
            arm_width: (8.0, 12.0),
            shank_length: (40.0, 52.0),
            leg_width: (10.0, 14.0),
            shoulder_width: (44.0, 60.0),
            hip_width: (34.0, 46.0),
            torso_height: (58.0, 72.0),
            head_radius: (12.0, 16.0),
            hair_thickness: (3.0, 6.0),
            hemline_length: (36.0, 48.0),
            translation: (-8.0, 8.0),
            jitter: (0.0, 0.8),
        }
    }
}

impl FigureSpec {
    fn values(&self) -> [(&'static str, Vec<f64>); 17] {
        [
            ("shoulder_angle", self.shoulder_angle.to_vec()),
            ("elbow_angle", self.elbow_angle.to_vec()),
            ("hip_angle", self.hip_angle.to_vec()),
            ("knee_angle", self.knee_angle.to_vec()),
            ("upper_arm_length", vec![self.upper_arm_length]),
            ("forearm_length", vec![self.forearm_length]),
            ("arm_width", vec![self.arm_width]),
            ("shank_length", vec![self.shank_length]),
            ("leg_width", vec![self.leg_width]),
            ("shoulder_width", vec![self.shoulder_width]),
            ("hip_width", vec![self.hip_width]),
            ("torso_height", vec![self.torso_height]),
            ("head_radius", vec![self.head_radius]),
            ("hair_thickness", vec![self.hair_thickness]),
            ("hemline_length", vec![self.hemline_length]),
            ("translation", self.translation.to_vec()),
            ("jitter", vec![self.jitter]),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for ((name, vals), (_, (lo, hi))) in self.values().iter().zip(SpecBounds::LIMITS.fields()) {
            for v in vals {
                if !(v.is_finite() && *v >= lo && *v <= hi) {
                    return Err(Error::SpecOutOfBounds(format!(
                        "{name} = {v} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact skeleton in canvas coordinates.
    pub fn skeleton(&self) -> Skeleton {
        let neck = Point::new(
            CANVAS_SIZE as f64 / 2.0 + self.translation[0],
            NECK_Y + self.translation[1],
        );
        let half = self.shoulder_width / 2.0;
        let hip_half = self.hip_width / 2.0;
        let hip_y = neck.y + self.torso_height;
        let side = |s: usize| {
            // direction that points away from the midline
            let out = if s == 0 { -1.0 } else { 1.0 };
            let dir = |deg: f64| {
                let r = deg.to_radians();
                Point::new(out * r.sin(), r.cos())
            };
            let shoulder = Point::new(neck.x + out * half, neck.y);
            let a = self.shoulder_angle[s];
            let elbow = shoulder + dir(a) * self.upper_arm_length;
            let wrist = elbow + dir(a - self.elbow_angle[s]) * self.forearm_length;
            let hip = Point::new(neck.x + out * hip_half, hip_y);
            let h = self.hip_angle[s];
            let knee = hip + dir(h) * self.hemline_length;
            let ankle = knee + dir(h + self.knee_angle[s]) * self.shank_length;
            [shoulder, elbow, wrist, hip, knee, ankle]
        };
        let [ls, le, lw, lh, lk, la] = side(0);
        let [rs, re, rw, rh, rk, ra] = side(1);
        let head_centre = Point::new(neck.x, neck.y - self.head_radius);
        Skeleton {
            head_centre,
            head_top: Point::new(neck.x, neck.y - 2.0 * self.head_radius),
            neck,
            shoulder: [ls, rs],
            elbow: [le, re],
            wrist: [lw, rw],
            hip: [lh, rh],
            knee: [lk, rk],
            ankle: [la, ra],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Skeleton {
    pub head_centre: Point,
    pub head_top: Point,
    pub neck: Point,
    pub shoulder: [Point; 2],
    pub elbow: [Point; 2],
    pub wrist: [Point; 2],
    pub hip: [Point; 2],
    pub knee: [Point; 2],
    pub ankle: [Point; 2],
}

impl Skeleton {
    pub fn keypoints(&self) -> FigureKeypoints {
        use JointId::*;
        let mut f = FigureKeypoints::new();
        let mut add = |label: PartLabel, joints: &[(JointId, Point)]| {
            let mut k = PartKeypointSet::new(label);
            for (j, p) in joints {
                k = k.with(*j, *p);
            }
            f.insert(label, k);
        };
        add(PartLabel::Hair, &[(HeadTop, self.head_top)]);
        add(
            PartLabel::Face,
            &[(HeadTop, self.head_top), (Neck, self.neck)],
        );
        add(
            PartLabel::TopClothes,
            &[
                (Neck, self.neck),
                (LShoulder, self.shoulder[0]),
                (RShoulder, self.shoulder[1]),
                (LHip, self.hip[0]),
                (RHip, self.hip[1]),
            ],
        );
        add(
            PartLabel::LeftArm,
            &[
                (LShoulder, self.shoulder[0]),
                (LElbow, self.elbow[0]),
                (LWrist, self.wrist[0]),
            ],
        );
        add(
            PartLabel::RightArm,
            &[
                (RShoulder, self.shoulder[1]),
                (RElbow, self.elbow[1]),
                (RWrist, self.wrist[1]),
            ],
        );
        add(
            PartLabel::BottomClothes,
            &[
                (LHip, self.hip[0]),
                (RHip, self.hip[1]),
                (LKnee, self.knee[0]),
                (RKnee, self.knee[1]),
            ],
        );
        add(
            PartLabel::LeftLeg,
            &[(LKnee, self.knee[0]), (LAnkle, self.ankle[0])],
        );
        add(
            PartLabel::RightLeg,
            &[(RKnee, self.knee[1]), (RAnkle, self.ankle[1])],
        );
        f
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Circle {
        c: Point,
        r: f64,
    },
    /// Annulus between `r0` and `r1`, kept above `cut_y`.
    Band {
        c: Point,
        r0: f64,
        r1: f64,
        cut_y: f64,
    },
    Polygon(Vec<Point>),
    Capsules {
        joints: Vec<Point>,
        r: f64,
    },
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y;
    let t = if len2 > 0.0 {
        (((p - a).x * ab.x + (p - a).y * ab.y) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(a + ab * t)
}

impl Shape {
    fn sdf(&self, p: Point) -> f64 {
        match self {
            Shape::Circle { c, r } => p.dist(*c) - r,
            Shape::Band { c, r0, r1, cut_y } => {
                let mid = 0.5 * (r0 + r1);
                let ring = (p.dist(*c) - mid).abs() - 0.5 * (r1 - r0);
                ring.max(p.y - cut_y)
            }
            Shape::Polygon(v) => {
                let n = v.len();
                let mut d = f64::INFINITY;
                let mut inside = false;
                for i in 0..n {
                    let (a, b) = (v[i], v[(i + n - 1) % n]);
                    d = d.min(segment_distance(p, a, b));
                    if (a.y > p.y) != (b.y > p.y)
                        && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x
                    {
                        inside = !inside;
                    }
                }
                if inside {
                    -d
                } else {
                    d
                }
            }
            Shape::Capsules { joints, r } => {
                joints
                    .windows(2)
                    .map(|w| segment_distance(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
                    - r
            }
        }
    }

    fn extent(&self) -> (Point, Point) {
        let pts: Vec<Point> = match self {
            Shape::Circle { c, r } => vec![*c - Point::new(*r, *r), *c + Point::new(*r, *r)],
            Shape::Band { c, r1, .. } => vec![*c - Point::new(*r1, *r1), *c + Point::new(*r1, *r1)],
            Shape::Polygon(v) => v.clone(),
            Shape::Capsules { joints, r } => joints
                .iter()
                .flat_map(|j| [*j - Point::new(*r, *r), *j + Point::new(*r, *r)])
                .collect(),
        };
        let lo = pts
            .iter()
            .fold(Point::new(f64::INFINITY, f64::INFINITY), |a, p| {
                Point::new(a.x.min(p.x), a.y.min(p.y))
            });
        let hi = pts
            .iter()
            .fold(Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
                Point::new(a.x.max(p.x), a.y.max(p.y))
            });
        (lo, hi)
    }
}

/// Smooth seeded displacement field with values in `[-1, 1]`.
#[derive(Clone, Debug)]
struct Noise {
    terms: [(f64, f64, f64, f64); NOISE_TERMS],
}

impl Noise {
    fn new(seed: u64, label: PartLabel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (label.code() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let mut terms = [(0.0, 0.0, 0.0, 0.0); NOISE_TERMS];
        let mut total = 0.0;
        for t in terms.iter_mut() {
            let freq = 0.05 + 0.15 * rng.random::<f64>();
            let angle = std::f64::consts::TAU * rng.random::<f64>();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            let amp = 0.2 + rng.random::<f64>();
            total += amp;
            *t = (freq * angle.cos(), freq * angle.sin(), phase, amp);
        }
        for t in terms.iter_mut() {
            t.3 /= total;
        }
        Noise { terms }
    }

    fn at(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|(fx, fy, ph, a)| a * (fx * p.x + fy * p.y + ph).sin())
            .sum()
    }
}

fn part_shapes(spec: &FigureSpec, s: &Skeleton) -> [(PartLabel, Shape); 8] {
    let r = spec.head_radius;
    [
        (
            PartLabel::Hair,
            Shape::Band {
                c: s.head_centre,
                r0: r,
                r1: r + spec.hair_thickness,
                cut_y: s.head_centre.y + 0.3 * r,
            },
        ),
        (
            PartLabel::Face,
            Shape::Circle {
                c: s.head_centre,
                r,
            },
        ),
        (
            PartLabel::TopClothes,
            Shape::Polygon(vec![s.shoulder[0], s.shoulder[1], s.hip[1], s.hip[0]]),
        ),
        (
            PartLabel::BottomClothes,
            Shape::Polygon(vec![s.hip[0], s.hip[1], s.knee[1], s.knee[0]]),
        ),
        (
            PartLabel::LeftArm,
            Shape::Capsules {
                joints: vec![s.shoulder[0], s.elbow[0], s.wrist[0]],
                r: spec.arm_width / 2.0,
            },
        ),
        (
            PartLabel::RightArm,
            Shape::Capsules {
                joints: vec![s.shoulder[1], s.elbow[1], s.wrist[1]],
                r: spec.arm_width / 2.0,
            },
        ),
        (
            PartLabel::LeftLeg,
            Shape::Capsules {
                joints: vec![s.knee[0], s.ankle[0]],
                r: spec.leg_width / 2.0,
            },
        ),
        (
            PartLabel::RightLeg,
            Shape::Capsules {
                joints: vec![s.knee[1], s.ankle[1]],
                r: spec.leg_width / 2.0,
            },
        ),
    ]
}

/// Quantises ink to the 8-bit levels a PNG round trip preserves.
pub(crate) fn quantize(ink: f64) -> f64 {
    (ink.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Renders one figure on the default canvas.
pub fn generate_figure(spec: &FigureSpec) -> Result<CorpusItem> {
    generate_figure_with_id(spec, 0)
}

pub(crate) fn generate_figure_with_id(spec: &FigureSpec, id: usize) -> Result<CorpusItem> {
    spec.validate()?;
    let skeleton = spec.skeleton();
    let shapes = part_shapes(spec, &skeleton);
    let reach = STROKE_HALF_WIDTH + 0.5;
    let size = CANVAS_SIZE;

    // strokes[p][pixel] and the owning label, painted in priority order
    let mut strokes = vec![vec![0.0f64; size * size]; PartLabel::PAINT_ORDER.len()];
    let mut owner = vec![0usize; size * size]; // 1 + index into PAINT_ORDER, 0 = background
    for (rank, label) in PartLabel::PAINT_ORDER.iter().enumerate() {
        let shape = &shapes.iter().find(|(l, _)| l == label).unwrap().1;
        let noise = Noise::new(spec.seed, *label);
        let (lo, hi) = shape.extent();
        let margin = reach + spec.jitter + 1.0;
        let x0 = (lo.x - margin).floor().max(0.0) as usize;
        let y0 = (lo.y - margin).floor().max(0.0) as usize;
        let x1 = ((hi.x + margin).ceil().max(0.0) as usize).min(size);
        let y1 = ((hi.y + margin).ceil().max(0.0) as usize).min(size);
        for y in y0..y1 {
            for x in x0..x1 {
                let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                let mut d = shape.sdf(p);
                if spec.jitter > 0.0 {
                    d += spec.jitter * noise.at(p);
                }
                if d <= reach {
                    owner[y * size + x] = rank + 1;
                    strokes[rank][y * size + x] = (reach - d.abs()).clamp(0.0, 1.0);
                }
            }
        }
    }

    let mut sketch = SketchRaster::blank(size, size);
    let mut labels = ParsingMap::blank(size, size);
    for y in 0..size {
        for x in 0..size {
            let o = owner[y * size + x];
            if o == 0 {
                continue;
            }
            labels.set(x, y, Some(PartLabel::PAINT_ORDER[o - 1]));
            let ink = (o - 1..strokes.len())
                .map(|r| strokes[r][y * size + x])
                .fold(0.0, f64::max);
            sketch.set(x, y, quantize(ink));
        }
    }

    let parts = part_crops(&sketch, &labels, PART_SIZE);
    Ok(CorpusItem {
        id,
        sketch,
        labels,
        parts,
        keypoints: skeleton.keypoints(),
        provenance: Provenance::Synthetic { spec: *spec },
    })
}

/// `n` figures drawn deterministically from `master_seed`, ids `0..n`.
pub fn sample_corpus(n: usize, master_seed: u64, bounds: &SpecBounds) -> Result<Vec<CorpusItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n)
        .map(|id| {
            let spec = bounds.sample(&mut rng);
            generate_figure_with_id(&spec, id)
        })
        .collect()
}
