use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transforms with `|det|` at or below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// A point in continuous canvas coordinates: origin at the top-left corner of
/// the canvas, pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// A 2x3 affine matrix `[[a, b, tx], [c, d, ty]]`, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct Affine2 {
    pub m: [f64; 6],
}

impl From<[f64; 6]> for Affine2 {
    fn from(m: [f64; 6]) -> Self {
        Affine2 { m }
    }
}

impl From<Affine2> for [f64; 6] {
    fn from(t: Affine2) -> Self {
        t.m
    }
}

impl Default for Affine2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 {
        m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    };

    pub const fn new(a: f64, b: f64, tx: f64, c: f64, d: f64, ty: f64) -> Self {
        Affine2 {
            m: [a, b, tx, c, d, ty],
        }
    }

    pub const fn translate(tx: f64, ty: f64) -> Self {
        Self::new(1.0, 0.0, tx, 0.0, 1.0, ty)
    }

    pub const fn scale(s: f64) -> Self {
        Self::scale_xy(s, s)
    }

    pub const fn scale_xy(sx: f64, sy: f64) -> Self {
        Self::new(sx, 0.0, 0.0, 0.0, sy, 0.0)
    }

    /// Counter-clockwise rotation in a y-up frame; on a y-down raster this
    /// turns clockwise on screen.
    pub fn rotate(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self::new(c, -s, 0.0, s, c, 0.0)
    }

    pub const fn shear(kx: f64, ky: f64) -> Self {
        Self::new(1.0, kx, 0.0, ky, 1.0, 0.0)
    }

    /// Conjugates `self` so that it acts about `center` instead of the origin.
    pub fn about(self, center: Point) -> Self {
        Self::translate(center.x, center.y)
            .compose(&self)
            .compose(&Self::translate(-center.x, -center.y))
    }

    pub fn det(&self) -> f64 {
        self.m[0] * self.m[4] - self.m[1] * self.m[3]
    }

    pub fn apply(&self, p: Point) -> Point {
        let [a, b, tx, c, d, ty] = self.m;
        Point::new(a * p.x + b * p.y + tx, c * p.x + d * p.y + ty)
    }

    /// `outer.compose(inner)` applies `inner` first.
    pub fn compose(&self, inner: &Affine2) -> Affine2 {
        let [a, b, tx, c, d, ty] = self.m;
        let [e, f, ux, g, h, uy] = inner.m;
        Affine2::new(
            a * e + b * g,
            a * f + b * h,
            a * ux + b * uy + tx,
            c * e + d * g,
            c * f + d * h,
            c * ux + d * uy + ty,
        )
    }

    pub fn invert(&self) -> Result<Affine2> {
        let det = self.det();
        if det.is_nan() || det.abs() <= SINGULAR_DET {
            return Err(Error::SingularTransform { det });
        }
        let [a, b, tx, c, d, ty] = self.m;
        let inv = 1.0 / det;
        let (ia, ib, ic, id) = (d * inv, -b * inv, -c * inv, a * inv);
        Ok(Affine2::new(
            ia,
            ib,
            -(ia * tx + ib * ty),
            ic,
            id,
            -(ic * tx + id * ty),
        ))
    }

    /// Frobenius distance of all six entries from `[I | 0]`.
    pub fn identity_distance(&self) -> f64 {
        self.m
            .iter()
            .zip(Self::IDENTITY.m.iter())
            .map(|(x, i)| (x - i) * (x - i))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Affine2) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    #[test]
    fn apply_point_examples() {
        let p = Affine2::IDENTITY.apply(Point::new(7.5, -2.0));
        assert_eq!(p, Point::new(7.5, -2.0));

        let r = Affine2::rotate(FRAC_PI_2).apply(Point::new(1.0, 0.0));
        assert!(close(r, Point::new(0.0, 1.0), 1e-15));

        // oracle: apply scale then translation by hand, (1,1) -> (2,2) -> (4,5)
        let composite = Affine2::translate(2.0, 3.0).compose(&Affine2::scale(2.0));
        let step =
            Affine2::translate(2.0, 3.0).apply(Affine2::scale(2.0).apply(Point::new(1.0, 1.0)));
        assert_eq!(step, Point::new(4.0, 5.0));
        assert_eq!(composite.apply(Point::new(1.0, 1.0)), Point::new(4.0, 5.0));
    }

    #[test]
    fn compose_examples() {
        let t = Affine2::new(1.5, -0.2, 3.0, 0.4, 0.9, -7.0);
        assert_eq!(Affine2::IDENTITY.compose(&t), t);
        let round = t.compose(&t.invert().unwrap());
        assert!(round.max_abs_diff(&Affine2::IDENTITY) <= 1e-9);
        assert_eq!(
            Affine2::translate(1.0, 0.0).compose(&Affine2::translate(0.0, 2.0)),
            Affine2::translate(1.0, 2.0)
        );
    }

    #[test]
    fn invert_examples() {
        assert_eq!(Affine2::IDENTITY.invert().unwrap(), Affine2::IDENTITY);
        assert_eq!(Affine2::scale(2.0).invert().unwrap(), Affine2::scale(0.5));
        let shear = Affine2::new(1.0, 1.0, 0.0, 0.0, 1.0, 0.0);
        let inv = shear.invert().unwrap();
        assert_eq!(inv, Affine2::new(1.0, -1.0, 0.0, 0.0, 1.0, 0.0));
        assert!(shear.compose(&inv).max_abs_diff(&Affine2::IDENTITY) <= 1e-12);
    }

    #[test]
    fn singular_invert_errors() {
        let t = Affine2::new(1.0, 2.0, 5.0, 2.0, 4.0, 1.0);
        assert!(matches!(t.invert(), Err(Error::SingularTransform { .. })));
        assert!(Affine2::scale(0.0).invert().is_err());
    }

    #[test]
    fn identity_distance_zero_only_at_identity() {
        assert_eq!(Affine2::IDENTITY.identity_distance(), 0.0);
        assert!((Affine2::translate(3.0, 4.0).identity_distance() - 5.0).abs() < 1e-15);
    }

    fn arb_affine() -> impl Strategy<Value = Affine2> {
        prop::array::uniform6(-3.0f64..3.0).prop_map(Affine2::from)
    }

    fn arb_invertible() -> impl Strategy<Value = Affine2> {
        arb_affine().prop_filter("well conditioned", |t| t.det().abs() > 0.1)
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in arb_affine(), b in arb_affine(), c in arb_affine()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(left.max_abs_diff(&right) <= 1e-12);
        }

        #[test]
        fn compose_matches_sequential_apply(a in arb_affine(), b in arb_affine(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = Point::new(x, y);
            let lhs = a.compose(&b).apply(p);
            let rhs = a.apply(b.apply(p));
            prop_assert!(close(lhs, rhs, 1e-10));
        }

        #[test]
        fn inverse_is_two_sided(t in arb_invertible()) {
            let inv = t.invert().unwrap();
            prop_assert!(t.compose(&inv).max_abs_diff(&Affine2::IDENTITY) <= 1e-9);
            prop_assert!(inv.compose(&t).max_abs_diff(&Affine2::IDENTITY) <= 1e-9);
        }

        #[test]
        fn apply_preserves_affine_combinations(t in arb_affine(), alpha in -2.0f64..2.0,
                                               px in -20.0f64..20.0, py in -20.0f64..20.0,
                                               qx in -20.0f64..20.0, qy in -20.0f64..20.0) {
            let p = Point::new(px, py);
            let q = Point::new(qx, qy);
            let lhs = t.apply(p * alpha + q * (1.0 - alpha));
            let rhs = t.apply(p) * alpha + t.apply(q) * (1.0 - alpha);
            prop_assert!(close(lhs, rhs, 1e-9));
        }

        #[test]
        fn identity_distance_nonnegative(t in arb_affine()) {
            let d = t.identity_distance();
            prop_assert!(d >= 0.0);
            if d <= 1e-12 {
                prop_assert!(t.max_abs_diff(&Affine2::IDENTITY) <= 1e-12);
            }
        }
    }
}
