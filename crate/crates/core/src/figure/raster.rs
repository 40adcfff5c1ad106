use serde::{Deserialize, Serialize};

use super::label::PartLabel;
use crate::error::{Error, Result};

/// Default canvas side length.
pub const CANVAS_SIZE: usize = 256;
/// Default canonical part-crop side length.
pub const PART_SIZE: usize = 64;

/// Dense row-major ink raster; `0` is blank paper, `1` full ink.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchRaster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl SketchRaster {
    pub fn blank(width: usize, height: usize) -> Self {
        assert!(
            width > 0 && height > 0,
            "raster dimensions must be positive"
        );
        SketchRaster {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Builds a raster from row-major values, clamping into `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(SketchRaster {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// Reads with out-of-range indices mapped to `fill`.
    pub fn get_or(&self, x: i64, y: i64, fill: f64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            fill
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            let row = &mut out.data[y * self.width..(y + 1) * self.width];
            row.reverse();
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SketchRaster) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Per-pixel maximum with `other`.
    pub fn max_with(&mut self, other: &SketchRaster) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = a.max(*b);
        }
    }

    /// Bilinear sample at index coordinates (pixel centres at integers).
    pub fn sample_bilinear(&self, x: f64, y: f64, fill: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (ix, iy) = (x0 as i64, y0 as i64);
        let v00 = self.get_or(ix, iy, fill);
        if fx == 0.0 && fy == 0.0 {
            return v00;
        }
        let v10 = self.get_or(ix + 1, iy, fill);
        let v01 = self.get_or(ix, iy + 1, fill);
        let v11 = self.get_or(ix + 1, iy + 1, fill);
        let top = v00 * (1.0 - fx) + v10 * fx;
        let bottom = v01 * (1.0 - fx) + v11 * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    }
}

/// Per-pixel semantic labels: `0` background, `1..=8` a [`PartLabel`] code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsingMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ParsingMap {
    pub fn blank(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        ParsingMap {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_codes(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|&&c| c > 8) {
            let count = data.iter().filter(|&&c| c == bad).count();
            return Err(Error::BadLabelCode { code: bad, count });
        }
        Ok(ParsingMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn codes(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Option<PartLabel>) {
        self.data[y * self.width + x] = label.map_or(0, PartLabel::code);
    }

    pub fn label_at(&self, x: usize, y: usize) -> Option<PartLabel> {
        PartLabel::from_code(self.get(x, y))
    }

    /// Pixel count per code `0..=8`.
    pub fn histogram(&self) -> [usize; 9] {
        let mut h = [0; 9];
        for &c in &self.data {
            h[c as usize] += 1;
        }
        h
    }

    /// Binary slice for one label, as a full-canvas mask.
    pub fn mask_of(&self, label: PartLabel) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&c| c == label.code()).collect(),
        }
    }

    /// Tight bounding box (in canvas coordinates) of the pixels carrying `label`.
    pub fn label_bounds(&self, label: PartLabel) -> Option<BoundingBox> {
        let code = label.code();
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.data[y * self.width + x] == code {
                    bounds = Some(match bounds {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bounds.map(|(x0, y0, x1, y1)| BoundingBox {
            x: x0 as f64,
            y: y0 as f64,
            width: (x1 - x0 + 1) as f64,
            height: (y1 - y0 + 1) as f64,
        })
    }

    pub fn present_labels(&self) -> Vec<PartLabel> {
        let h = self.histogram();
        PartLabel::ALL
            .into_iter()
            .filter(|l| h[l.code() as usize] > 0)
            .collect()
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.data[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }
}

/// Binary foreground mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn get_or_false(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.data[y as usize * self.width + x as usize]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.data[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }

    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn to_raster(&self) -> SketchRaster {
        SketchRaster {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Pixels with value `>= 0.5` become foreground.
    pub fn threshold(raster: &SketchRaster) -> Self {
        BinaryMask {
            width: raster.width,
            height: raster.height,
            data: raster.data.iter().map(|&v| v >= 0.5).collect(),
        }
    }

    /// Fills the region enclosed by strokes: everything not reachable from
    /// the border through non-ink pixels (4-connectivity).
    pub fn fill_from_ink(raster: &SketchRaster) -> Self {
        let (w, h) = (raster.width, raster.height);
        let ink: Vec<bool> = raster.data.iter().map(|&v| v >= 0.5).collect();
        let mut outside = vec![false; w * h];
        let mut stack = Vec::new();
        for x in 0..w {
            stack.push((x, 0));
            stack.push((x, h - 1));
        }
        for y in 0..h {
            stack.push((0, y));
            stack.push((w - 1, y));
        }
        while let Some((x, y)) = stack.pop() {
            let i = y * w + x;
            if outside[i] || ink[i] {
                continue;
            }
            outside[i] = true;
            if x > 0 {
                stack.push((x - 1, y));
            }
            if x + 1 < w {
                stack.push((x + 1, y));
            }
            if y > 0 {
                stack.push((x, y - 1));
            }
            if y + 1 < h {
                stack.push((x, y + 1));
            }
        }
        BinaryMask {
            width: w,
            height: h,
            data: outside.into_iter().map(|o| !o).collect(),
        }
    }
}

/// Axis-aligned box in canvas coordinates. May extend past the canvas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        let b = BoundingBox {
            x,
            y,
            width,
            height,
        };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::InvalidRequest(format!("invalid bounding box {b:?}")))
        }
    }

    pub fn canvas(width: usize, height: usize) -> Self {
        BoundingBox {
            x: 0.0,
            y: 0.0,
            width: width as f64,
            height: height as f64,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0.0
            && self.height > 0.0
            && self.x.is_finite()
            && self.y.is_finite()
            && self.width.is_finite()
            && self.height.is_finite()
    }

    /// Grows each side by `frac` of the box's extent along that axis.
    pub fn dilated(&self, frac: f64) -> Self {
        let dx = self.width * frac;
        let dy = self.height * frac;
        BoundingBox {
            x: self.x - dx,
            y: self.y - dy,
            width: self.width + 2.0 * dx,
            height: self.height + 2.0 * dy,
        }
    }

    /// Smallest box containing all `points`.
    pub fn enclosing(points: impl IntoIterator<Item = super::Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(BoundingBox {
            x: x0,
            y: y0,
            width: (x1 - x0).max(1e-6),
            height: (y1 - y0).max(1e-6),
        })
    }

    pub fn corners(&self) -> [super::Point; 4] {
        use super::Point;
        [
            Point::new(self.x, self.y),
            Point::new(self.x + self.width, self.y),
            Point::new(self.x, self.y + self.height),
            Point::new(self.x + self.width, self.y + self.height),
        ]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BoundingBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

/// One body part: its canonical `P x P` crop and where it sits on the canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct PartSketch {
    pub label: PartLabel,
    pub bbox: BoundingBox,
    pub crop: SketchRaster,
}

impl PartSketch {
    /// An absent part is an all-blank crop.
    pub fn absent(label: PartLabel, part_size: usize) -> Self {
        PartSketch {
            label,
            bbox: BoundingBox::canvas(part_size, part_size),
            crop: SketchRaster::blank(part_size, part_size),
        }
    }

    pub fn is_absent(&self) -> bool {
        self.crop.is_blank()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_clamps_and_validates() {
        let r = SketchRaster::from_vec(2, 1, vec![-1.0, 2.0]).unwrap();
        assert_eq!(r.data(), &[0.0, 1.0]);
        assert!(SketchRaster::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn parsing_map_rejects_bad_codes() {
        let err = ParsingMap::from_codes(2, 2, vec![0, 9, 9, 1]).unwrap_err();
        assert!(matches!(err, Error::BadLabelCode { code: 9, count: 2 }));
    }

    #[test]
    fn label_bounds_are_tight() {
        let mut m = ParsingMap::blank(10, 10);
        m.set(2, 3, Some(PartLabel::Face));
        m.set(5, 7, Some(PartLabel::Face));
        let b = m.label_bounds(PartLabel::Face).unwrap();
        assert_eq!(b, BoundingBox::new(2.0, 3.0, 4.0, 5.0).unwrap());
        assert!(m.label_bounds(PartLabel::Hair).is_none());
    }

    #[test]
    fn fill_from_ink_closes_a_ring() {
        let mut r = SketchRaster::blank(7, 7);
        for i in 1..6 {
            r.set(i, 1, 1.0);
            r.set(i, 5, 1.0);
            r.set(1, i, 1.0);
            r.set(5, i, 1.0);
        }
        let m = BinaryMask::fill_from_ink(&r);
        assert!(m.get(3, 3));
        assert!(m.get(1, 1));
        assert!(!m.get(0, 0));
        assert_eq!(m.count(), 25);
    }

    #[test]
    fn iou_of_disjoint_and_identical() {
        let a = BinaryMask::from_vec(2, 1, vec![true, false]).unwrap();
        let b = BinaryMask::from_vec(2, 1, vec![false, true]).unwrap();
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&b), 0.0);
    }
}
