use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::figure::{BinaryMask, PartLabel, ShapeClass, SketchRaster, PART_SIZE};

/// Default latent dimensionality.
pub const DEFAULT_LATENT_DIM: usize = 128;
/// Ridge strength for the mask regressor.
pub const MASK_RIDGE: f64 = 1e-2;

/// Coordinates of one part in its class's shape space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub class: ShapeClass,
    pub coords: Vec<f64>,
}

impl LatentVector {
    pub fn zeros(class: ShapeClass, dim: usize) -> Self {
        LatentVector {
            class,
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &LatentVector) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

/// One training sample: a part crop and its ground-truth mask crop.
#[derive(Clone, Debug)]
pub struct TrainingCrop {
    pub label: PartLabel,
    pub crop: SketchRaster,
    pub mask: BinaryMask,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    /// Requested latent dimension; clamped to the numerical rank per class.
    pub dim: usize,
    pub mask_ridge: f64,
    /// Fewer samples than this in a class is an error.
    pub min_samples: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            dim: DEFAULT_LATENT_DIM,
            mask_ridge: MASK_RIDGE,
            min_samples: 2,
        }
    }
}

/// Linear shape space of one class: `x ~ mean + basis * v`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpace {
    pub class: ShapeClass,
    pub part_size: usize,
    /// Flattened mean crop, length `P*P`.
    pub mean: DVector<f64>,
    /// `P*P x d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// `n x d` corpus latents; row index is the sample id.
    pub latents: DMatrix<f64>,
    /// `(d+1) x P*P`, last row is the bias.
    pub mask_regressor: DMatrix<f64>,
}

impl ShapeSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn len(&self) -> usize {
        self.latents.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn latent(&self, id: usize) -> LatentVector {
        LatentVector {
            class: self.class,
            coords: self.latents.row(id).iter().copied().collect(),
        }
    }

    fn check_crop(&self, crop: &SketchRaster) -> Result<()> {
        if crop.width() != self.part_size || crop.height() != self.part_size {
            return Err(Error::DimensionMismatch {
                expected: self.part_size * self.part_size,
                actual: crop.width() * crop.height(),
            });
        }
        Ok(())
    }

    fn check_latent(&self, v: &LatentVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.dim(),
            });
        }
        Ok(())
    }

    /// `B^T (x - mean)` on the canonical (un-mirrored) crop.
    pub fn encode_canonical(&self, crop: &SketchRaster) -> Result<LatentVector> {
        self.check_crop(crop)?;
        let centred = DVector::from_iterator(
            self.mean.len(),
            crop.data().iter().zip(self.mean.iter()).map(|(x, m)| x - m),
        );
        let v = self.basis.tr_mul(&centred);
        Ok(LatentVector {
            class: self.class,
            coords: v.iter().copied().collect(),
        })
    }

    pub fn encode(&self, label: PartLabel, crop: &SketchRaster) -> Result<LatentVector> {
        if label.is_mirrored() {
            self.encode_canonical(&crop.mirrored())
        } else {
            self.encode_canonical(crop)
        }
    }

    pub fn decode_sketch_canonical(&self, v: &LatentVector) -> Result<SketchRaster> {
        self.check_latent(v)?;
        let coords = DVector::from_column_slice(&v.coords);
        let x = &self.mean + &self.basis * coords;
        SketchRaster::from_vec(self.part_size, self.part_size, x.iter().copied().collect())
    }

    pub fn decode_sketch(&self, label: PartLabel, v: &LatentVector) -> Result<SketchRaster> {
        let s = self.decode_sketch_canonical(v)?;
        Ok(if label.is_mirrored() { s.mirrored() } else { s })
    }

    /// Raw (pre-threshold) mask regression scores.
    pub fn mask_scores(&self, v: &LatentVector) -> Result<DVector<f64>> {
        self.check_latent(v)?;
        let d = self.dim();
        let mut z = DVector::zeros(d + 1);
        z.rows_mut(0, d).copy_from_slice(&v.coords);
        z[d] = 1.0;
        Ok(self.mask_regressor.tr_mul(&z))
    }

    pub fn decode_mask_canonical(&self, v: &LatentVector) -> Result<BinaryMask> {
        let scores = self.mask_scores(v)?;
        BinaryMask::from_vec(
            self.part_size,
            self.part_size,
            scores.iter().map(|&s| s > 0.5).collect(),
        )
    }

    pub fn decode_mask(&self, label: PartLabel, v: &LatentVector) -> Result<BinaryMask> {
        let m = self.decode_mask_canonical(v)?;
        Ok(if label.is_mirrored() { m.mirrored() } else { m })
    }

    /// Largest row norm of the basis. Any decoded pixel moves by at most this
    /// times the latent displacement norm.
    pub fn basis_row_norm_max(&self) -> f64 {
        self.basis.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// Fits one class from canonical (already mirrored) samples.
    pub fn fit(
        class: ShapeClass,
        crops: &[SketchRaster],
        masks: &[BinaryMask],
        opts: &BuildOptions,
    ) -> Result<ShapeSpace> {
        let n = crops.len();
        let required = opts.min_samples.max(2);
        if n < required {
            return Err(Error::InsufficientCorpus {
                class: Some(class),
                available: n,
                required,
            });
        }
        let part_size = crops[0].width();
        let dim_px = part_size * part_size;
        for c in crops {
            if c.width() != part_size || c.height() != part_size {
                return Err(Error::DimensionMismatch {
                    expected: dim_px,
                    actual: c.width() * c.height(),
                });
            }
        }
        assert_eq!(masks.len(), n, "one mask per crop");

        let mut x = DMatrix::<f64>::zeros(n, dim_px);
        for (i, c) in crops.iter().enumerate() {
            for (j, &v) in c.data().iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let mean = DVector::from_iterator(dim_px, x.column_iter().map(|col| col.sum() / n as f64));
        for mut row in x.row_iter_mut() {
            row -= mean.transpose();
        }

        let basis = principal_basis(&x, opts.dim, class)?;
        let latents = &x * &basis;
        let mask_regressor = fit_mask_regressor(&latents, masks, opts.mask_ridge);

        Ok(ShapeSpace {
            class,
            part_size,
            mean,
            basis,
            latents,
            mask_regressor,
        })
    }
}

/// Top principal directions of the (already centred) rows of `x`.
///
/// Works through the `n x n` Gram matrix, lifts eigenvectors back to pixel
/// space and re-orthonormalises; the result is sign-normalised so the largest
/// magnitude entry of each column is positive.
fn principal_basis(x: &DMatrix<f64>, dim: usize, class: ShapeClass) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let gram = x * x.transpose();
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]].max(0.0).sqrt();
    let rank = order
        .iter()
        .take_while(|&&i| {
            let s = eig.eigenvalues[i].max(0.0).sqrt();
            top > 0.0 && s > 1e-7 * top
        })
        .count();
    if rank == 0 {
        return Err(Error::DegenerateCorpus { class });
    }
    let d = dim.min(rank).max(1);
    if d < dim {
        warn!("shape class {class:?}: latent dimension clamped from {dim} to rank {d}");
    }

    let mut basis = DMatrix::<f64>::zeros(x.ncols(), d);
    for (k, &i) in order.iter().take(d).enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        let col = x.tr_mul(&eig.eigenvectors.column(i)) / s;
        basis.set_column(k, &col);
    }
    orthonormalise(&mut basis);
    for mut col in basis.column_iter_mut() {
        let mut best = 0usize;
        for (r, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = r;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(basis)
}

/// Two passes of modified Gram-Schmidt, in column order.
fn orthonormalise(b: &mut DMatrix<f64>) {
    for _ in 0..2 {
        for k in 0..b.ncols() {
            for j in 0..k {
                let proj = b.column(j).dot(&b.column(k));
                let cj = b.column(j).clone_owned();
                b.column_mut(k).axpy(-proj, &cj, 1.0);
            }
            let norm = b.column(k).norm();
            b.column_mut(k).unscale_mut(norm);
        }
    }
}

/// Ridge regression from `[latent; 1]` to flattened masks. The bias is not
/// penalised, so a constant target is reproduced exactly.
fn fit_mask_regressor(latents: &DMatrix<f64>, masks: &[BinaryMask], ridge: f64) -> DMatrix<f64> {
    let (n, d) = latents.shape();
    let dim_px = masks[0].width() * masks[0].height();
    let mut z = DMatrix::<f64>::zeros(n, d + 1);
    z.view_mut((0, 0), (n, d)).copy_from(latents);
    z.column_mut(d).fill(1.0);
    let mut y = DMatrix::<f64>::zeros(n, dim_px);
    for (i, m) in masks.iter().enumerate() {
        for (j, &b) in m.data().iter().enumerate() {
            if b {
                y[(i, j)] = 1.0;
            }
        }
    }
    let mut a = z.tr_mul(&z);
    for k in 0..d {
        a[(k, k)] += ridge;
    }
    let rhs = z.tr_mul(&y);
    match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => a
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DMatrix::zeros(d + 1, dim_px)),
    }
}

/// Per-class shape spaces for the whole figure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShapeSpaceIndex {
    pub spaces: BTreeMap<ShapeClass, ShapeSpace>,
}

impl ShapeSpaceIndex {
    pub fn space(&self, class: ShapeClass) -> Result<&ShapeSpace> {
        self.spaces
            .get(&class)
            .ok_or(Error::MissingShapeClass(class))
    }

    pub fn space_for(&self, label: PartLabel) -> Result<&ShapeSpace> {
        self.space(label.shape_class())
    }

    pub fn part_size(&self) -> usize {
        self.spaces
            .values()
            .next()
            .map_or(PART_SIZE, |s| s.part_size)
    }

    pub fn encode(&self, label: PartLabel, crop: &SketchRaster) -> Result<LatentVector> {
        self.space_for(label)?.encode(label, crop)
    }

    pub fn decode_sketch(&self, label: PartLabel, v: &LatentVector) -> Result<SketchRaster> {
        self.space_for(label)?.decode_sketch(label, v)
    }

    pub fn decode_mask(&self, label: PartLabel, v: &LatentVector) -> Result<BinaryMask> {
        self.space_for(label)?.decode_mask(label, v)
    }
}

/// Fits one shape space per class present in `samples`. Right-side limbs are
/// mirrored into the shared class; within a class, rows keep input order.
pub fn build_shape_space(samples: &[TrainingCrop], opts: &BuildOptions) -> Result<ShapeSpaceIndex> {
    let mut grouped: BTreeMap<ShapeClass, (Vec<SketchRaster>, Vec<BinaryMask>)> = BTreeMap::new();
    for s in samples {
        let entry = grouped.entry(s.label.shape_class()).or_default();
        if s.label.is_mirrored() {
            entry.0.push(s.crop.mirrored());
            entry.1.push(s.mask.mirrored());
        } else {
            entry.0.push(s.crop.clone());
            entry.1.push(s.mask.clone());
        }
    }
    let mut spaces = BTreeMap::new();
    for (class, (crops, masks)) in grouped {
        spaces.insert(class, ShapeSpace::fit(class, &crops, &masks, opts)?);
    }
    Ok(ShapeSpaceIndex { spaces })
}
