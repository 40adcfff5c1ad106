//! End-to-end refinement: projection onto the part shape spaces, cascaded
//! structure alignment, reassembly and a colourised preview.

mod eval;
mod preview;

pub use eval::{evaluate_recovery, RecoveryReport, RecoveryRun};
pub use preview::{compose_preview, Palette, RgbImage, INK_OPACITY};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    decode_png_gray, encode_png_gray, ingest_item, keypoints_from_json, keypoints_to_json,
    labels_to_png, sketch_from_png, sketch_to_png,
};
use crate::error::{Error, Result};
use crate::figure::{
    crop_resample, Affine2, BinaryMask, BoundingBox, ParsingMap, PartLabel, PartSketch,
    SketchRaster, CANVAS_SIZE,
};
use crate::shape_space::{
    assemble_global, project, refine_part, ProjectionResult, ShapeSpaceIndex, DEFAULT_K,
};
use crate::structure::{
    extract_figure_keypoints, refine_structure, EnergyWeights, FigureKeypoints, SkeletonPrior,
    StructureOptions,
};

fn default_k() -> usize {
    DEFAULT_K
}

fn default_steps() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineOptions {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub lambda_h: Option<f64>,
    #[serde(default)]
    pub lambda_p: Option<f64>,
    #[serde(default)]
    pub lambda_l: Option<f64>,
    #[serde(default)]
    pub skip_projection: bool,
    #[serde(default)]
    pub skip_transformation: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            k: DEFAULT_K,
            steps: 3,
            lambda_h: None,
            lambda_p: None,
            lambda_l: None,
            skip_projection: false,
            skip_transformation: false,
        }
    }
}

impl RefineOptions {
    pub fn weights(&self) -> EnergyWeights {
        let d = EnergyWeights::default();
        EnergyWeights {
            connectivity: self.lambda_h.unwrap_or(d.connectivity),
            proportion: self.lambda_p.unwrap_or(d.proportion),
            regularization: self.lambda_l.unwrap_or(d.regularization),
            ..d
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidRequest("k must be at least 1".into()));
        }
        for (name, v) in [
            ("lambda_h", self.lambda_h),
            ("lambda_p", self.lambda_p),
            ("lambda_l", self.lambda_l),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidRequest(format!(
                        "{name} must be finite and non-negative"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One inline part: a grayscale PNG crop (dark ink on white) placed
/// through `box`. The optional mask is a PNG where non-zero is foreground.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartPayload {
    pub label: PartLabel,
    pub png: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default)]
    pub mask: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanvasSize {
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineRequest {
    #[serde(default)]
    pub parts: Vec<PartPayload>,
    /// Directory holding `sketch.png`, `labels.png` and optionally
    /// `keypoints.json`; mutually exclusive with `parts`.
    #[serde(default)]
    pub item_dir: Option<PathBuf>,
    /// Keypoints in the `keypoints.json` layout; extracted from masks when
    /// absent.
    #[serde(default)]
    pub keypoints: Option<serde_json::Value>,
    #[serde(default)]
    pub canvas: Option<CanvasSize>,
    #[serde(default)]
    pub options: RefineOptions,
}

impl RefineRequest {
    /// Inline request carrying each part as PNG crop, box and mask.
    pub fn from_parts(
        parts: &[(PartSketch, BinaryMask)],
        keypoints: Option<&FigureKeypoints>,
        canvas: (usize, usize),
        options: RefineOptions,
    ) -> Result<RefineRequest> {
        let mut payloads = Vec::with_capacity(parts.len());
        for (part, mask) in parts {
            payloads.push(PartPayload {
                label: part.label,
                png: encode_b64(&sketch_to_png(&part.crop)?),
                bbox: part.bbox,
                mask: Some(encode_b64(&mask_to_png(mask)?)),
            });
        }
        let keypoints = match keypoints {
            Some(k) => Some(serde_json::from_str(&keypoints_to_json(k)?)?),
            None => None,
        };
        Ok(RefineRequest {
            parts: payloads,
            item_dir: None,
            keypoints,
            canvas: Some(CanvasSize {
                width: canvas.0,
                height: canvas.1,
            }),
            options,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub decode_ms: f64,
    pub projection_ms: f64,
    pub structure_ms: f64,
    pub assemble_ms: f64,
    pub preview_ms: f64,
    pub total_ms: f64,
}

/// Everything the pipeline produces, as rasters.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub sketch: SketchRaster,
    pub parsing: ParsingMap,
    pub preview: RgbImage,
    pub parts: BTreeMap<PartLabel, PartSketch>,
    pub masks: BTreeMap<PartLabel, BinaryMask>,
    pub keypoints: FigureKeypoints,
    /// Per part, the transform of every cascade step; empty when the
    /// structure stage did not run.
    pub transforms: BTreeMap<PartLabel, Vec<Affine2>>,
    pub total_transforms: BTreeMap<PartLabel, Affine2>,
    pub projections: BTreeMap<PartLabel, ProjectionResult>,
    pub energy_trace: Vec<f64>,
    pub timings: Timings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineResponse {
    pub width: usize,
    pub height: usize,
    pub sketch_png: String,
    pub parsing_png: String,
    pub preview_png: String,
    pub transforms: BTreeMap<PartLabel, Vec<Affine2>>,
    pub total_transforms: BTreeMap<PartLabel, Affine2>,
    pub projections: BTreeMap<PartLabel, ProjectionResult>,
    pub energy_trace: Vec<f64>,
    pub timings: Timings,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn decode_b64(s: &str, what: &str) -> Result<Vec<u8>> {
    B64.decode(s.as_bytes())
        .map_err(|e| Error::InvalidRequest(format!("{what}: bad base64 ({e})")))
}

pub fn encode_b64(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

pub fn rgb_to_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    image::ImageEncoder::write_image(
        image::codecs::png::PngEncoder::new(&mut buf),
        &img.data,
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(buf)
}

pub fn mask_to_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let px: Vec<u8> = mask
        .data()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    encode_png_gray(mask.width(), mask.height(), &px)
}

/// Brings a crop of any size to `size x size`.
fn to_part_size(raster: SketchRaster, size: usize) -> SketchRaster {
    if raster.width() == size && raster.height() == size {
        raster
    } else {
        let full = BoundingBox::canvas(raster.width(), raster.height());
        crop_resample(&raster, &full, size)
    }
}

/// Interior of a drawn part: the ink plus whatever it encloses.
pub fn mask_from_ink(crop: &SketchRaster) -> BinaryMask {
    let filled = BinaryMask::fill_from_ink(crop);
    if filled.is_empty() {
        BinaryMask::threshold(crop)
    } else {
        filled
    }
}

/// A request's present parts, supplied keypoints and canvas size.
#[derive(Clone, Debug)]
pub struct DecodedRequest {
    pub parts: Vec<(PartSketch, BinaryMask)>,
    pub keypoints: Option<FigureKeypoints>,
    pub canvas: (usize, usize),
}

pub fn decode_parts(req: &RefineRequest, part_size: usize) -> Result<DecodedRequest> {
    let mut keypoints = match &req.keypoints {
        Some(v) => Some(keypoints_from_json(&v.to_string())?),
        None => None,
    };
    let mut canvas = req
        .canvas
        .as_ref()
        .map(|c| (c.width, c.height))
        .unwrap_or((CANVAS_SIZE, CANVAS_SIZE));
    let mut parts = Vec::new();
    match (&req.item_dir, req.parts.is_empty()) {
        (Some(_), false) => {
            return Err(Error::InvalidRequest(
                "give either parts or item_dir, not both".into(),
            ));
        }
        (Some(dir), true) => {
            let item = ingest_item(dir, part_size)?;
            canvas = (item.sketch.width(), item.sketch.height());
            if keypoints.is_none() {
                keypoints = Some(item.keypoints.clone());
            }
            parts = item.part_pairs();
        }
        (None, _) => {
            for p in &req.parts {
                if !p.bbox.is_valid() {
                    return Err(Error::InvalidRequest(format!("{}: invalid box", p.label)));
                }
                if parts
                    .iter()
                    .any(|(q, _): &(PartSketch, BinaryMask)| q.label == p.label)
                {
                    return Err(Error::InvalidRequest(format!("{} given twice", p.label)));
                }
                let crop = to_part_size(
                    sketch_from_png(&decode_b64(&p.png, p.label.name())?)?,
                    part_size,
                );
                let mask = match &p.mask {
                    Some(m) => {
                        let (w, h, px) = decode_png_gray(&decode_b64(m, p.label.name())?, "mask")?;
                        let raster = SketchRaster::from_vec(
                            w,
                            h,
                            px.iter().map(|&v| (v > 0) as u8 as f64).collect(),
                        )?;
                        BinaryMask::threshold(&to_part_size(raster, part_size))
                    }
                    None => mask_from_ink(&crop),
                };
                parts.push((
                    PartSketch {
                        label: p.label,
                        bbox: p.bbox,
                        crop,
                    },
                    mask,
                ));
            }
        }
    }
    if canvas.0 == 0 || canvas.1 == 0 {
        return Err(Error::InvalidRequest("canvas must be non-empty".into()));
    }
    parts.retain(|(p, _)| !p.is_absent());
    if parts.is_empty() {
        return Err(Error::EmptySketch);
    }
    Ok(DecodedRequest {
        parts,
        keypoints,
        canvas,
    })
}

/// Projection, structure refinement, reassembly and preview for one sketch.
pub fn run_pipeline_raw(
    req: &RefineRequest,
    index: &ShapeSpaceIndex,
    prior: &SkeletonPrior,
) -> Result<PipelineOutput> {
    let start = Instant::now();
    let opts = &req.options;
    opts.validate()?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let DecodedRequest {
        parts: inputs,
        keypoints: given_keypoints,
        canvas: (width, height),
    } = decode_parts(req, index.part_size())?;
    timings.decode_ms = ms(t);

    let t = Instant::now();
    let mut projections = BTreeMap::new();
    let mut parts = Vec::with_capacity(inputs.len());
    for (part, mask) in inputs {
        if opts.skip_projection {
            parts.push((part, mask));
        } else {
            let refined = refine_part(index, &part, opts.k)?;
            if let Some(p) = refined.projection {
                projections.insert(part.label, p);
            }
            parts.push((refined.sketch, refined.mask));
        }
    }
    timings.projection_ms = ms(t);

    let t = Instant::now();
    let run_structure = !opts.skip_transformation && opts.steps > 0;
    let mut transforms = BTreeMap::new();
    let mut total_transforms = BTreeMap::new();
    let mut energy_trace = Vec::new();
    let keypoints = match given_keypoints {
        Some(k) => k,
        None if run_structure => {
            extract_figure_keypoints(parts.iter().map(|(p, m)| (p.label, &p.bbox, m)))?
        }
        None => FigureKeypoints::new(),
    };
    let (out_parts, out_masks, keypoints) = if run_structure {
        let sopts = StructureOptions {
            steps: opts.steps,
            weights: opts.weights(),
            canvas_width: width,
            canvas_height: height,
            ..StructureOptions::default()
        };
        let sol = refine_structure(&parts, &keypoints, prior, &sopts)?;
        for step in &sol.steps {
            for (l, t) in step {
                transforms.entry(*l).or_insert_with(Vec::new).push(*t);
            }
        }
        total_transforms = sol.totals;
        energy_trace = sol.energy_trace;
        (sol.parts, sol.masks, sol.keypoints)
    } else {
        let mut out_parts = BTreeMap::new();
        let mut out_masks = BTreeMap::new();
        for (part, mask) in parts {
            out_masks.insert(part.label, mask);
            out_parts.insert(part.label, part);
        }
        (out_parts, out_masks, keypoints)
    };
    timings.structure_ms = ms(t);

    let t = Instant::now();
    let (sketch, parsing) = assemble_global(
        out_parts.values().map(|p| (p, &out_masks[&p.label])),
        width,
        height,
    );
    timings.assemble_ms = ms(t);

    let t = Instant::now();
    let preview = compose_preview(&sketch, &parsing, &Palette::default())?;
    timings.preview_ms = ms(t);
    timings.total_ms = ms(start);

    Ok(PipelineOutput {
        sketch,
        parsing,
        preview,
        parts: out_parts,
        masks: out_masks,
        keypoints,
        transforms,
        total_transforms,
        projections,
        energy_trace,
        timings,
    })
}

impl PipelineOutput {
    pub fn to_response(&self) -> Result<RefineResponse> {
        Ok(RefineResponse {
            width: self.sketch.width(),
            height: self.sketch.height(),
            sketch_png: encode_b64(&sketch_to_png(&self.sketch)?),
            parsing_png: encode_b64(&labels_to_png(&self.parsing)?),
            preview_png: encode_b64(&rgb_to_png(&self.preview)?),
            transforms: self.transforms.clone(),
            total_transforms: self.total_transforms.clone(),
            projections: self.projections.clone(),
            energy_trace: self.energy_trace.clone(),
            timings: self.timings.clone(),
        })
    }
}

pub fn run_pipeline(
    req: &RefineRequest,
    index: &ShapeSpaceIndex,
    prior: &SkeletonPrior,
) -> Result<RefineResponse> {
    run_pipeline_raw(req, index, prior)?.to_response()
}

/// A single part to project, as sent by the live shadow preview.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectRequest {
    pub label: PartLabel,
    pub png: String,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectResponse {
    pub label: PartLabel,
    pub projection: ProjectionResult,
    pub crop_png: String,
    pub mask_png: String,
}

pub fn run_project(req: &ProjectRequest, index: &ShapeSpaceIndex) -> Result<ProjectResponse> {
    if req.k == 0 {
        return Err(Error::InvalidRequest("k must be at least 1".into()));
    }
    let crop = to_part_size(
        sketch_from_png(&decode_b64(&req.png, "png")?)?,
        index.part_size(),
    );
    if crop.is_blank() {
        return Err(Error::EmptySketch);
    }
    let space = index.space_for(req.label)?;
    let v = space.encode(req.label, &crop)?;
    let projection = project(space, &v, req.k)?;
    let decoded = space.decode_sketch(req.label, &projection.projected)?;
    let mask = space.decode_mask(req.label, &projection.projected)?;
    Ok(ProjectResponse {
        label: req.label,
        projection,
        crop_png: encode_b64(&sketch_to_png(&decoded)?),
        mask_png: encode_b64(&mask_to_png(&mask)?),
    })
}
