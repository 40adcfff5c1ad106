use crate::error::{Error, Result};
use crate::figure::Point;

use super::joints::{JointId, PartKeypointSet};

pub const DEFAULT_SIGMA: f64 = 6.0;
pub const DEFAULT_STRIDE: usize = 4;

/// One joint's Gaussian bump sampled on a regular grid. Grid cell `(i, j)`
/// samples canvas point `(i * stride, j * stride)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    /// `exp(-|p - k|^2 / (2 sigma^2))` over a grid covering a
    /// `canvas_w x canvas_h` canvas.
    pub fn render(
        keypoint: Point,
        sigma: f64,
        stride: usize,
        canvas_w: usize,
        canvas_h: usize,
    ) -> Self {
        assert!(
            sigma > 0.0 && stride > 0,
            "sigma and stride must be positive"
        );
        let width = canvas_w.div_ceil(stride);
        let height = canvas_h.div_ceil(stride);
        let denom = 2.0 * sigma * sigma;
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            let dy = (j * stride) as f64 - keypoint.y;
            for i in 0..width {
                let dx = (i * stride) as f64 - keypoint.x;
                values.push((-(dx * dx + dy * dy) / denom).exp());
            }
        }
        Heatmap {
            width,
            height,
            stride,
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    pub fn grid_point(&self, i: usize, j: usize) -> Point {
        Point::new((i * self.stride) as f64, (j * self.stride) as f64)
    }

    /// Peak location in canvas coordinates, refined to sub-cell precision by
    /// a parabola through the log-values of the max cell and its neighbours
    /// on each axis. A Gaussian's logarithm is exactly quadratic, so rendered
    /// peaks are recovered without bias.
    pub fn argmax(&self) -> Result<Point> {
        let first = self.values[0];
        if self.values.iter().all(|&v| v == first) {
            return Err(Error::FlatHeatmap);
        }
        let mut best = 0usize;
        for (idx, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = idx;
            }
        }
        let (i, j) = (best % self.width, best / self.width);
        let centre = self.grid_point(i, j);
        let offset = |lo: Option<f64>, mid: f64, hi: Option<f64>| -> f64 {
            let (Some(lo), Some(hi)) = (lo, hi) else {
                return 0.0;
            };
            if lo <= 0.0 || mid <= 0.0 || hi <= 0.0 {
                return 0.0;
            }
            let (l, m, h) = (lo.ln(), mid.ln(), hi.ln());
            let curvature = l - 2.0 * m + h;
            if curvature.is_nan() || curvature >= 0.0 {
                return 0.0;
            }
            (0.5 * (l - h) / curvature).clamp(-0.5, 0.5)
        };
        let mid = self.values[best];
        let dx = offset(
            (i > 0).then(|| self.get(i - 1, j)),
            mid,
            (i + 1 < self.width).then(|| self.get(i + 1, j)),
        );
        let dy = offset(
            (j > 0).then(|| self.get(i, j - 1)),
            mid,
            (j + 1 < self.height).then(|| self.get(i, j + 1)),
        );
        let s = self.stride as f64;
        Ok(Point::new(centre.x + dx * s, centre.y + dy * s))
    }
}

/// One channel per joint of a part.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapStack {
    pub channels: Vec<(JointId, Heatmap)>,
}

pub fn render_heatmaps(
    kp: &PartKeypointSet,
    sigma: f64,
    stride: usize,
    canvas_w: usize,
    canvas_h: usize,
) -> HeatmapStack {
    HeatmapStack {
        channels: kp
            .joints
            .iter()
            .map(|(j, p)| (*j, Heatmap::render(*p, sigma, stride, canvas_w, canvas_h)))
            .collect(),
    }
}

pub fn heatmap_argmax(h: &Heatmap) -> Result<Point> {
    h.argmax()
}
